#include "ovclip/captionkit.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ovclip/io_util.hpp"

namespace ovclip {

FrameCaptionSet stub_frame_captions(const std::vector<FrameMeta>& meta) {
  if (meta.empty())
    throw InvalidArgument("stub_frame_captions: no frame metadata");
  FrameCaptionSet out;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const FrameMeta& m = meta[i];
    if (m.row < 0 || m.row > 1 || m.col < 0 || m.col > 1)
      throw InvalidArgument("stub_frame_captions: grid position out of range");
    out.emplace_back(static_cast<int>(i),
                     "a " + std::string(shape_word(m.shape)) + " at row " +
                         std::to_string(m.row) + " column " +
                         std::to_string(m.col));
  }
  return out;
}

ChatPrompt build_prompts(const FrameCaptionSet& frames) {
  if (frames.empty()) throw InvalidArgument("build_prompts: no frame captions");
  int prev = -1;
  for (const auto& [idx, cap] : frames) {
    if (idx <= prev)
      throw InvalidArgument("build_prompts: frame indices must strictly increase");
    if (cap.empty()) throw InvalidArgument("build_prompts: empty frame caption");
    prev = idx;
  }
  std::string joined;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i) joined += ", ";
    joined += frames[i].second;
  }
  ChatPrompt p;
  p.system = "Always answer in one sentence.";
  p.user = "Input: These are captions of the frames in a sequential order "
           "within the same video: " +
           joined +
           ". Please summarize the whole video according to the frame "
           "captions in short. Output: The video shows";
  return p;
}

// ---- stub summarizer ----

namespace {

std::vector<std::string> split_on(const std::string& s, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

}  // namespace

std::string StubSummarizer::complete(const ChatPrompt& prompt) {
  const std::string open = "within the same video: ";
  const std::string close = ". Please summarize";
  std::size_t a = prompt.user.find(open);
  std::size_t b = prompt.user.find(close);
  if (a == std::string::npos || b == std::string::npos || b <= a)
    throw BackendError("stub summarizer: prompt does not carry frame captions");
  std::string caps = prompt.user.substr(a + open.size(), b - a - open.size());

  std::string shape;
  std::vector<int> track;
  for (const std::string& cap : split_on(caps, ", ")) {
    // expected form: "a <shape> at row <r> column <c>"
    std::istringstream in(cap);
    std::string a_, s, at, row, r, column, c;
    if (!(in >> a_ >> s >> at >> row >> r >> column >> c) || a_ != "a" ||
        at != "at" || row != "row" || column != "column")
      throw BackendError("stub summarizer: unparseable frame caption '" + cap + "'");
    if (shape.empty()) shape = s;
    if (s != shape)
      throw BackendError("stub summarizer: frames disagree on the shape");
    int ri = r == "0" ? 0 : r == "1" ? 1 : -1;
    int ci = c == "0" ? 0 : c == "1" ? 1 : -1;
    if (ri < 0 || ci < 0)
      throw BackendError("stub summarizer: grid position out of range in '" +
                         cap + "'");
    track.push_back(ri * 2 + ci);
  }
  for (int p = 0; p < kNumPatterns; ++p) {
    std::array<int, 4> pat = pattern_track(static_cast<Pattern>(p));
    if (track.size() == pat.size() &&
        std::equal(track.begin(), track.end(), pat.begin()))
      return "a " + shape + " moving in a " +
             pattern_word(static_cast<Pattern>(p)) + " manner across the grid";
  }
  throw BackendError("stub summarizer: trajectory matches no known pattern");
}

// ---- http summarizer ----

HttpSummarizer::HttpSummarizer(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty())
    throw InvalidConfig("http summarizer: endpoint not configured");
  if (cfg_.model.empty())
    throw InvalidConfig("http summarizer: model not configured");
  if (cfg_.max_attempts < 1)
    throw InvalidConfig("http summarizer: max_attempts must be >= 1");
}

std::string HttpSummarizer::complete(const ChatPrompt& prompt) {
  std::size_t scheme = cfg_.endpoint.find("://");
  if (scheme == std::string::npos)
    throw InvalidConfig("http summarizer: endpoint must include a scheme");
  std::size_t path_pos = cfg_.endpoint.find('/', scheme + 3);
  std::string base = path_pos == std::string::npos
                         ? cfg_.endpoint
                         : cfg_.endpoint.substr(0, path_pos);
  std::string path = path_pos == std::string::npos
                         ? std::string("/")
                         : cfg_.endpoint.substr(path_pos);

  nlohmann::json body{
      {"model", cfg_.model},
      {"messages",
       {{{"role", "system"}, {"content", prompt.system}},
        {{"role", "user"}, {"content", prompt.user}}}}};
  httplib::Headers headers;
  if (!cfg_.token_env.empty()) {
    const char* token = std::getenv(cfg_.token_env.c_str());
    if (!token || !*token)
      throw BackendError("http summarizer: environment variable " +
                         cfg_.token_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  std::string last_error;
  for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
    if (attempt > 1) {
      int wait = cfg_.backoff_ms << (attempt - 2);
      std::this_thread::sleep_for(std::chrono::milliseconds(wait));
    }
    httplib::Client client(base);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status != 200) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      last_error = "unparseable response body";
      continue;
    }
    if (!reply.contains("choices") || !reply["choices"].is_array() ||
        reply["choices"].empty() ||
        !reply["choices"][0].contains("message") ||
        !reply["choices"][0]["message"].contains("content")) {
      last_error = "response lacks choices[0].message.content";
      continue;
    }
    return reply["choices"][0]["message"]["content"].get<std::string>();
  }
  throw BackendError("http summarizer: " + std::to_string(cfg_.max_attempts) +
                     " attempts failed, last error: " + last_error);
}

// ---- per-video captioning ----

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string caption_video(const std::vector<FrameMeta>& meta,
                          CaptionBackend& backend) {
  ChatPrompt prompt = build_prompts(stub_frame_captions(meta));
  std::string completion = trim(backend.complete(prompt));
  if (completion.empty())
    throw EmptyCompletionError("caption_video: backend returned an empty completion");
  return "The video shows " + completion;
}

std::vector<std::pair<std::string, std::string>> caption_samples(
    const std::vector<Sample>& samples, CaptionBackend& backend) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    try {
      out.emplace_back(s.id, caption_video(s.meta, backend));
    } catch (const Error& e) {
      throw BackendError("captioning video " + s.id + ": " + e.what());
    }
  }
  return out;
}

// ---- store ----

void save_caption_store(
    const std::vector<std::pair<std::string, std::string>>& rows,
    const std::string& path) {
  std::string out;
  for (const auto& [id, caption] : rows) {
    if (id.empty() || id.find_first_of("\t\n") != std::string::npos)
      throw InvalidArgument("caption store: bad video id '" + id + "'");
    if (caption.empty() || caption.find_first_of("\t\n") != std::string::npos)
      throw InvalidArgument("caption store: caption for " + id +
                            " is empty or contains tab/newline");
    out += id;
    out += '\t';
    out += caption;
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::map<std::string, std::string> load_caption_store(const std::string& path) {
  std::string text = read_file_text(path);
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    ++lineno;
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw FormatError("caption store " + path + ": line " +
                        std::to_string(lineno) + " is not 'id<TAB>caption'");
    std::string id = line.substr(0, tab), caption = line.substr(tab + 1);
    if (id.empty() || caption.empty())
      throw FormatError("caption store " + path + ": line " +
                        std::to_string(lineno) + " has an empty field");
    if (!out.emplace(id, caption).second)
      throw FormatError("caption store " + path + ": duplicate id " + id);
  }
  return out;
}

}  // namespace ovclip
