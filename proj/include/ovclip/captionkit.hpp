#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ovclip/datagen.hpp"

namespace ovclip {

// Video captioning pipeline: per-frame captions (stand-in for an image
// captioner) are stitched into a chat prompt and handed to a summarizing
// language-model backend (stand-in for an instruction-following LLM), whose
// completion continues the phrase "The video shows". The prompt text is a
// fixed contract — tests pin it byte for byte.

// (frame index, caption) pairs, indices strictly increasing.
using FrameCaptionSet = std::vector<std::pair<int, std::string>>;

struct ChatPrompt {
  std::string system;
  std::string user;
};

// Deterministic per-frame captioner over ground-truth frame metadata:
// "a <shape> at row <r> column <c>".
FrameCaptionSet stub_frame_captions(const std::vector<FrameMeta>& meta);

// The exact prompt pair for a set of frame captions.
ChatPrompt build_prompts(const FrameCaptionSet& frames);

class CaptionBackend {
 public:
  virtual ~CaptionBackend() = default;
  // Returns the completion text that continues "The video shows".
  virtual std::string complete(const ChatPrompt& prompt) = 0;
  virtual std::string name() const = 0;
};

// Offline stand-in for the summarizer: parses the frame captions embedded in
// the user prompt, recovers the trajectory, and answers with
// "a <shape> moving in a <pattern> manner across the grid".
class StubSummarizer : public CaptionBackend {
 public:
  std::string complete(const ChatPrompt& prompt) override;
  std::string name() const override { return "stub"; }
};

// Chat-completions HTTP backend. Sends {model, messages:[system,user]} as
// JSON and reads choices[0].message.content. Retries transient failures with
// exponential backoff. The bearer token is read from the environment variable
// named in `token_env` at request time; the value itself is never logged.
struct HttpBackendConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model;
  std::string token_env;  // empty: no Authorization header
  int max_attempts = 3;
  int backoff_ms = 1000;  // doubles after each failed attempt
};

class HttpSummarizer : public CaptionBackend {
 public:
  explicit HttpSummarizer(HttpBackendConfig cfg);
  std::string complete(const ChatPrompt& prompt) override;
  std::string name() const override { return "service:" + cfg_.model; }

 private:
  HttpBackendConfig cfg_;
};

// Full caption for one video: prompt construction plus backend completion.
std::string caption_video(const std::vector<FrameMeta>& meta,
                          CaptionBackend& backend);

// Caption every sample, returning (sample id, caption) rows in input order.
// A backend failure is rethrown naming the offending video.
std::vector<std::pair<std::string, std::string>> caption_samples(
    const std::vector<Sample>& samples, CaptionBackend& backend);

// TSV store: one "id<TAB>caption" line per video, atomic write. Captions
// containing tabs or newlines are rejected at write time.
void save_caption_store(const std::vector<std::pair<std::string, std::string>>& rows,
                        const std::string& path);
std::map<std::string, std::string> load_caption_store(const std::string& path);

}  // namespace ovclip
