#pragma once

#include <map>
#include <string>

#include "ovclip/datagen.hpp"
#include "ovclip/model.hpp"
#include "ovclip/weightspace.hpp"

namespace ovclip {

// Orchestration above the individual modules: the corpus on disk, the two
// training phases, and the run manifests that accompany every artifact.

// ---- corpus on disk ----
//
// Layout under `dir`:
//   manifest.tsv           sample_id TAB split TAB class_id TAB label
//   positions.tsv          sample_id TAB comma-joined track positions
//   pretrain_captions.tsv  sample_id TAB caption (pretraining images only)
//   splits/<split>.ovck    clip tensors named by sample id
//   vocab.txt              one word per line, pad token first
//   classes.tsv            class_id TAB label
//   config.tsv             key TAB value (corpus config, seed, held-out ids)
void save_corpus(const Dataset& d, const std::string& dir);
Dataset load_corpus(const std::string& dir);

// Order-independent digest of the corpus files, hex-encoded.
std::string corpus_digest(const std::string& dir);

// FNV-1a over a file's bytes, hex-encoded.
std::string file_digest_hex(const std::string& path);

// ---- phase A: image/caption pretraining ----
//
// Contrastive alignment of single-frame clips with their stored captions.
// Both towers train, so cfg.freeze_text must be false; IWR, SWA, and the
// caption weight are fine-tuning machinery and must be off here.
Checkpoint pretrain_phase(const ModelConfig& mcfg, const Dataset& data,
                          const TrainConfig& cfg, const StepHook& hook = {});

// ---- phase B: video fine-tuning ----

// Batch gradient provider over data.train: loss = label_w * L_label +
// caption_w * L_caption, where L_label aligns clips with "a video of
// <label>" prompts and L_caption with per-video captions from `captions`
// (sample id -> caption text). A batch needing a missing caption throws.
BatchGradFn finetune_grad_fn(const ModelConfig& mcfg, const Dataset& data,
                             const std::map<std::string, std::string>& captions,
                             int window);

// Fine-tune from the phase-A anchor over data.train.
TrainResult finetune_phase(const ModelConfig& mcfg, const Dataset& data,
                           const std::map<std::string, std::string>& captions,
                           const Checkpoint& anchor, const TrainConfig& cfg,
                           const StepHook& hook = {});

// ---- run manifests ----

// "key TAB value" rows, sorted by key, written atomically.
void write_run_manifest(const std::string& path,
                        const std::map<std::string, std::string>& entries);

}  // namespace ovclip
