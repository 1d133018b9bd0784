#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ovclip/checkpoint.hpp"
#include "ovclip/datagen.hpp"
#include "ovclip/model.hpp"

namespace ovclip {

// Zero-shot evaluation harness: classification under several subset
// protocols, Recall@K retrieval, interpolation-sweep trade-off curves, and a
// single-image probe. Everything is a pure function of (checkpoint, inputs,
// seed); repeated runs are bit-reproducible.

struct Metrics {
  double top1 = 0.0, top5 = 0.0;
  double top1_std = 0.0, top5_std = 0.0;  // across protocol repeats
  std::map<int, double> t2v_recall, v2t_recall;  // K -> recall, retrieval only

  // top5 >= top1, everything in [0,1], recall nondecreasing in K.
  void validate() const;
};

struct SweepRow {
  double lam = 0.0;
  double closeset_top1 = 0.0;
  double zeroshot_top1 = 0.0;
};

// Evaluation items: clips paired with ground-truth class ids.
struct LabeledClips {
  std::vector<VideoClip> clips;
  std::vector<int> class_ids;

  std::size_t size() const { return clips.size(); }
  void validate() const;
};

// The classification anchor set: ascending unique class ids with their
// tokenized prompts.
struct ClassPrompts {
  std::vector<int> ids;
  std::vector<TextSequence> prompts;

  std::size_t size() const { return ids.size(); }
  int column_of(int class_id) const;  // -1 when absent
  void validate() const;
};

// ---- dataset adapters ----

LabeledClips to_labeled(const std::vector<Sample>& samples);

// "a video of <label>" prompts for the given class ids.
ClassPrompts label_class_prompts(const std::vector<ClassSpec>& classes,
                                 const std::vector<int>& ids,
                                 const Vocabulary& vocab, int max_len);

// "a photo of a <shape>" prompts, class id = shape index.
ClassPrompts image_class_prompts(const Vocabulary& vocab, int max_len);

LabeledClips filter_by_class(const LabeledClips& items,
                             const std::vector<int>& keep_ids);
ClassPrompts subset_prompts(const ClassPrompts& classes,
                            const std::vector<int>& keep_ids);

// ---- embedding ----

// Unit-norm embedding rows for clips/texts under a self-describing
// checkpoint (architecture read from its metadata). Batched internally.
Tensor<float> embed_clips(const Checkpoint& ckpt,
                          const std::vector<VideoClip>& clips, int window,
                          int batch = 64);
Tensor<float> embed_texts(const Checkpoint& ckpt,
                          const std::vector<TextSequence>& texts,
                          int batch = 64);

// Cyclic temporal shift: frame t of the result is frame (t + offset) mod T.
VideoClip rotate_clip(const VideoClip& clip, int offset);

// Mean cosine-similarity logits over `views` evenly spaced temporal offsets
// (views = 1 evaluates the clip as-is): rows items, columns classes.
Tensor<float> class_scores(const Checkpoint& ckpt,
                           const std::vector<VideoClip>& clips,
                           const std::vector<TextSequence>& class_texts,
                           int window, int views);

// ---- classification ----

// Top-1/top-5 over mean-of-views logits; argmax ties resolve to the lowest
// class index. top5 uses min(5, #classes) ranks.
Metrics classify_zero_shot(const Checkpoint& ckpt, const LabeledClips& items,
                           const ClassPrompts& classes, int window,
                           int views = 1);

// Subset protocols. EP1 restricts to `repeats` random half-class subsets and
// reports mean/std across them; EP2 is the single full-set evaluation; EP3
// re-evaluates on 3 seeded half-item subsamples; K600Split on 3 seeded
// half-class subsets. EP3/K600Split always use 3 repeats.
enum class Protocol { EP1, EP2, EP3, K600Split };

Protocol protocol_from_name(const std::string& name);
std::string protocol_name(Protocol p);

// The exact class subsets a protocol run will use (EP1/K600Split).
std::vector<std::vector<int>> protocol_class_subsets(Protocol p,
                                                     const std::vector<int>& class_ids,
                                                     int repeats,
                                                     std::uint64_t seed);
// The item-index subsets EP3 will use.
std::vector<std::vector<int>> protocol_item_subsets(int n_items, int repeats,
                                                    std::uint64_t seed);

Metrics run_protocol(Protocol p, const Checkpoint& ckpt,
                     const LabeledClips& items, const ClassPrompts& classes,
                     int window, int views, int repeats, std::uint64_t seed);

// ---- retrieval ----

// Text->video and video->text Recall@K over the full clip/caption similarity
// matrix. Captions must be pairwise distinct token sequences and |pairs| must
// cover max(Ks). Rank ties resolve to the lower index.
Metrics retrieval_eval(const Checkpoint& ckpt,
                       const std::vector<VideoClip>& clips,
                       const std::vector<TextSequence>& captions,
                       const std::vector<int>& Ks, int window);

// ---- trade-off sweep ----

struct TradeoffInputs {
  LabeledClips closeset_items;
  ClassPrompts closeset_classes;
  LabeledClips zeroshot_items;
  ClassPrompts zeroshot_classes;
};

// One row per lambda in grid order: the anchor/tuned interpolation at lambda
// is scored on both splits. lambda = 0 reproduces `tuned`, lambda = 1
// reproduces `anchor`.
std::vector<SweepRow> tradeoff_sweep(const Checkpoint& anchor,
                                     const Checkpoint& tuned,
                                     const std::vector<double>& grid,
                                     const TradeoffInputs& in, int window,
                                     int views = 1);

// ---- image probe ----

// Single-frame clips evaluated with window 1 (a lone frame has no temporal
// neighbors, so the window cannot matter).
Metrics image_task_eval(const Checkpoint& ckpt, const LabeledClips& images,
                        const ClassPrompts& classes);

// ---- CSV output ----

// "lambda,closeset_top1,zeroshot_top1", 6 decimals, LF endings.
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
// "metric,mean,std" rows: top1, top5, then any recall entries.
void write_metrics_csv(const Metrics& m, const std::string& path);

}  // namespace ovclip
