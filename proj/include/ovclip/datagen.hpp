#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "ovclip/model.hpp"
#include "ovclip/rng.hpp"

namespace ovclip {

// Synthetic video corpus: a glyph (square, triangle, cross, ring) moves over
// a 2x2 cell grid following one of four trajectory patterns. The 16
// shape x pattern combinations are the class set.
//
// Track cells are indexed 0..3 = (row, col) in {(0,0),(0,1),(1,0),(1,1)}.
// Patterns as position-per-frame tracks over T = 4 frames:
//   linear    [0, 1, 2, 3]
//   zigzag    [0, 2, 1, 3]
//   holdjump  [0, 0, 3, 3]
//   alternate [0, 3, 0, 3]
// linear/zigzag visit the same cells in a different order, as do
// holdjump/alternate. Frame noise is seeded per (video, cell), so two
// same-seed videos whose patterns fall in the same pair consist of exactly
// the same frames reordered: their frame multisets are identical, and only
// temporal order separates the classes.

enum class Shape { square, triangle, cross, ring };
enum class Pattern { linear, zigzag, holdjump, alternate };

constexpr int kNumShapes = 4;
constexpr int kNumPatterns = 4;
constexpr int kNumClasses = kNumShapes * kNumPatterns;

const char* shape_word(Shape s);
const char* pattern_word(Pattern p);
std::array<int, 4> pattern_track(Pattern p);

// linear/zigzag share pair 0, holdjump/alternate share pair 1.
int pattern_pair(Pattern p);

struct ClassSpec {
  int id;
  Shape shape;
  Pattern pattern;
  std::string label;  // "<shape> <pattern>"
};

std::vector<ClassSpec> class_table();

// Per-frame ground truth used by the caption stand-ins.
struct FrameMeta {
  Shape shape;
  int row = 0;
  int col = 0;
};

// One corpus element: a clip plus labels and caption bookkeeping. Pretrain
// samples are single-frame clips whose class id is the shape index and whose
// caption comes from the pretraining templates; video samples get captions
// only once a captioner has run.
struct Sample {
  std::string id;
  VideoClip clip;
  int class_id = 0;
  std::string label;
  std::vector<FrameMeta> meta;
  std::string caption;
};

// Render one frame: glyph at a track cell plus clamped uniform pixel noise.
Tensor<float> render_frame(Shape shape, int track_pos, std::uint64_t noise_seed,
                           float noise_amp, int frame_size = 16);

// Repeat a single frame into a static clip.
VideoClip make_static_video(const Tensor<float>& frame, int T);

// ---- vocabulary ----

struct Vocabulary {
  std::vector<std::string> words;          // words[0] is the pad token
  std::map<std::string, int> index;

  int id(const std::string& word) const;
  int pad_id() const { return 0; }
  int size() const { return static_cast<int>(words.size()); }
};

// Whitespace word tokenizer over a closed vocabulary; lowercases first.
TextSequence tokenize(const Vocabulary& vocab, const std::string& text,
                      int max_len);

std::string label_prompt(const std::string& label);   // "a video of <label>"
std::string image_prompt(const std::string& shape);   // "a photo of a <shape>"

// The three pretraining caption templates for an image.
std::vector<std::string> pretrain_captions(Shape shape, int row, int col);

// ---- corpus ----

struct CorpusConfig {
  int frame_size = 16;
  int clip_len = 4;
  float noise_amp = 0.05f;
  int pretrain_per_shape = 64;
  int pretrain_test_per_shape = 16;
  int train_per_class = 40;
  int test_per_class = 20;
  int heldout_test_per_class = 20;
  std::vector<int> heldout_ids;  // empty: derive a shape/pattern matching

  void validate() const;
};

struct Dataset {
  CorpusConfig cfg;
  std::uint64_t seed = 0;
  std::vector<ClassSpec> classes;
  std::vector<int> seen_ids, heldout_ids;
  std::vector<Sample> pretrain_train, pretrain_test;
  std::vector<Sample> train, seen_test, heldout_test;
  Vocabulary vocab;

  const ClassSpec& class_by_id(int id) const;
};

// Deterministic function of (cfg, seed).
Dataset build_corpus(const CorpusConfig& cfg, std::uint64_t seed);

// Every word used by held-out labels must also occur in some seen label,
// otherwise zero-shot transfer to the held-out classes is vacuous.
void validate_split_atoms(const std::vector<ClassSpec>& classes,
                          const std::vector<int>& seen_ids,
                          const std::vector<int>& heldout_ids);

}  // namespace ovclip
