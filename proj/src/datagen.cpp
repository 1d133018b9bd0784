#include "ovclip/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace ovclip {

const char* shape_word(Shape s) {
  switch (s) {
    case Shape::square: return "square";
    case Shape::triangle: return "triangle";
    case Shape::cross: return "cross";
    case Shape::ring: return "ring";
  }
  throw InvalidArgument("shape_word: bad shape");
}

const char* pattern_word(Pattern p) {
  switch (p) {
    case Pattern::linear: return "linear";
    case Pattern::zigzag: return "zigzag";
    case Pattern::holdjump: return "holdjump";
    case Pattern::alternate: return "alternate";
  }
  throw InvalidArgument("pattern_word: bad pattern");
}

std::array<int, 4> pattern_track(Pattern p) {
  switch (p) {
    case Pattern::linear: return {0, 1, 2, 3};
    case Pattern::zigzag: return {0, 2, 1, 3};
    case Pattern::holdjump: return {0, 0, 3, 3};
    case Pattern::alternate: return {0, 3, 0, 3};
  }
  throw InvalidArgument("pattern_track: bad pattern");
}

int pattern_pair(Pattern p) {
  return (p == Pattern::linear || p == Pattern::zigzag) ? 0 : 1;
}

std::vector<ClassSpec> class_table() {
  std::vector<ClassSpec> out;
  for (int s = 0; s < kNumShapes; ++s)
    for (int p = 0; p < kNumPatterns; ++p) {
      ClassSpec c;
      c.id = s * kNumPatterns + p;
      c.shape = static_cast<Shape>(s);
      c.pattern = static_cast<Pattern>(p);
      c.label = std::string(shape_word(c.shape)) + " " + pattern_word(c.pattern);
      out.push_back(std::move(c));
    }
  return out;
}

namespace {

// Glyphs live in an 8x8 cell, drawn inside the 6x6 box at offset (1,1).
// Pairwise distinct by construction (see the datagen tests, which compare
// every pair pixel by pixel).
void draw_glyph(Shape shape, float* cell, int stride) {
  auto px = [&](int r, int c) -> float& { return cell[r * stride + c]; };
  switch (shape) {
    case Shape::square:
      for (int r = 1; r <= 6; ++r)
        for (int c = 1; c <= 6; ++c) px(r, c) = 1.0f;
      break;
    case Shape::triangle:
      for (int r = 1; r <= 6; ++r)
        for (int c = 1; c <= r; ++c) px(r, c) = 1.0f;
      break;
    case Shape::cross:
      for (int c = 1; c <= 6; ++c) px(3, c) = px(4, c) = 1.0f;
      for (int r = 1; r <= 6; ++r) px(r, 3) = px(r, 4) = 1.0f;
      break;
    case Shape::ring:
      for (int c = 1; c <= 6; ++c) px(1, c) = px(6, c) = 1.0f;
      for (int r = 1; r <= 6; ++r) px(r, 1) = px(r, 6) = 1.0f;
      break;
  }
}

}  // namespace

Tensor<float> render_frame(Shape shape, int track_pos, std::uint64_t noise_seed,
                           float noise_amp, int frame_size) {
  if (track_pos < 0 || track_pos > 3)
    throw InvalidArgument("render_frame: track position must lie in 0..3, got " +
                          std::to_string(track_pos));
  if (frame_size % 2 != 0 || frame_size < 4)
    throw InvalidArgument("render_frame: frame_size must be even and >= 4");
  if (noise_amp < 0.0f || noise_amp > 0.5f)
    throw InvalidArgument("render_frame: noise_amp must lie in [0, 0.5]");
  Tensor<float> f = Tensor<float>::zeros({frame_size, frame_size});
  int half = frame_size / 2;
  int row0 = (track_pos / 2) * half;
  int col0 = (track_pos % 2) * half;
  // glyph coordinates assume an 8x8 cell; scale positions for other sizes by
  // clipping into the available half
  if (half >= 8) {
    draw_glyph(shape, f.data.data() + row0 * frame_size + col0, frame_size);
  } else {
    // tiny frames: fill the whole cell; enough to stay distinct per position
    for (int r = 0; r < half; ++r)
      for (int c = 0; c < half; ++c)
        f.data[(row0 + r) * frame_size + col0 + c] = 1.0f;
  }
  if (noise_amp > 0.0f) {
    std::mt19937_64 eng = make_engine(noise_seed, "pixel-noise");
    for (Eigen::Index i = 0; i < f.numel(); ++i) {
      float v = f.data[i] +
                static_cast<float>(uniform_range(eng, -noise_amp, noise_amp));
      f.data[i] = std::min(1.0f, std::max(0.0f, v));
    }
  }
  return f;
}

VideoClip make_static_video(const Tensor<float>& frame, int T) {
  if (frame.rank() != 2) throw InvalidArgument("make_static_video: frame must be 2-d");
  if (T < 1) throw InvalidArgument("make_static_video: T must be >= 1");
  VideoClip clip;
  clip.frames = Tensor<float>::zeros({T, frame.shape[0], frame.shape[1]});
  for (int t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < frame.numel(); ++i)
      clip.frames.data[t * frame.numel() + i] = frame.data[i];
  return clip;
}

// ---- vocabulary ----

int Vocabulary::id(const std::string& word) const {
  auto it = index.find(word);
  if (it == index.end())
    throw InvalidArgument("vocabulary: word '" + word + "' not in vocabulary");
  return it->second;
}

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(lowercase(text));
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

Vocabulary build_vocabulary() {
  std::set<std::string> words;
  auto absorb = [&](const std::string& text) {
    for (const auto& w : split_words(text)) words.insert(w);
  };
  for (const ClassSpec& c : class_table()) {
    absorb(label_prompt(c.label));
    absorb(image_prompt(shape_word(c.shape)));
    for (int r = 0; r < 2; ++r)
      for (int col = 0; col < 2; ++col)
        for (const auto& cap : pretrain_captions(c.shape, r, col)) absorb(cap);
    absorb("the video shows a " + std::string(shape_word(c.shape)) +
           " moving in a " + pattern_word(c.pattern) + " manner across the grid");
  }
  Vocabulary v;
  v.words.push_back("<pad>");
  for (const auto& w : words) v.words.push_back(w);
  for (int i = 0; i < static_cast<int>(v.words.size()); ++i)
    v.index[v.words[i]] = i;
  return v;
}

}  // namespace

TextSequence tokenize(const Vocabulary& vocab, const std::string& text,
                      int max_len) {
  std::vector<std::string> words = split_words(text);
  if (words.empty()) throw InvalidArgument("tokenize: empty text");
  if (static_cast<int>(words.size()) > max_len)
    throw InvalidArgument("tokenize: text '" + text + "' longer than " +
                          std::to_string(max_len) + " tokens");
  TextSequence s;
  for (const auto& w : words) s.ids.push_back(vocab.id(w));
  s.len = static_cast<int>(s.ids.size());
  return s;
}

std::string label_prompt(const std::string& label) {
  return "a video of " + label;
}

std::string image_prompt(const std::string& shape) {
  return "a photo of a " + shape;
}

std::vector<std::string> pretrain_captions(Shape shape, int row, int col) {
  std::string s = shape_word(shape);
  return {
      "a photo of a " + s,
      "a " + s + " at row " + std::to_string(row) + " column " + std::to_string(col),
      "an image of a " + s,
  };
}

// ---- corpus ----

void CorpusConfig::validate() const {
  if (frame_size < 4 || frame_size % 2 != 0)
    throw InvalidConfig("corpus: frame_size must be even and >= 4");
  if (clip_len != 4)
    throw InvalidConfig("corpus: clip_len must be 4 (the trajectory patterns "
                        "are defined over 4 frames)");
  if (noise_amp < 0.0f || noise_amp > 0.5f)
    throw InvalidConfig("corpus: noise_amp must lie in [0, 0.5]");
  if (pretrain_per_shape < 1 || pretrain_test_per_shape < 1 ||
      train_per_class < 1 || test_per_class < 1 || heldout_test_per_class < 1)
    throw InvalidConfig("corpus: all per-class counts must be >= 1");
  for (int id : heldout_ids)
    if (id < 0 || id >= kNumClasses)
      throw InvalidConfig("corpus: held-out class id out of range");
}

void validate_split_atoms(const std::vector<ClassSpec>& classes,
                          const std::vector<int>& seen_ids,
                          const std::vector<int>& heldout_ids) {
  std::set<std::string> seen_atoms;
  for (int id : seen_ids)
    for (const auto& w : split_words(classes.at(id).label)) seen_atoms.insert(w);
  for (int id : heldout_ids)
    for (const auto& w : split_words(classes.at(id).label))
      if (!seen_atoms.count(w))
        throw InvalidConfig("corpus: held-out label atom '" + w +
                            "' appears in no seen label");
}

const ClassSpec& Dataset::class_by_id(int id) const {
  if (id < 0 || id >= static_cast<int>(classes.size()))
    throw InvalidArgument("dataset: bad class id " + std::to_string(id));
  return classes[id];
}

namespace {

std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

Sample make_video_sample(const ClassSpec& cls, const CorpusConfig& cfg,
                         std::uint64_t video_seed, const std::string& id) {
  std::array<int, 4> track = pattern_track(cls.pattern);
  Sample s;
  s.id = id;
  s.class_id = cls.id;
  s.label = cls.label;
  s.clip.frames =
      Tensor<float>::zeros({cfg.clip_len, cfg.frame_size, cfg.frame_size});
  Eigen::Index fn = static_cast<Eigen::Index>(cfg.frame_size) * cfg.frame_size;
  for (int t = 0; t < cfg.clip_len; ++t) {
    // noise keyed by the cell, not the frame index: same-seed videos whose
    // patterns reorder the same cells share frames exactly
    std::uint64_t noise = derive_seed(video_seed, "cell-noise", track[t]);
    Tensor<float> f =
        render_frame(cls.shape, track[t], noise, cfg.noise_amp, cfg.frame_size);
    for (Eigen::Index i = 0; i < fn; ++i) s.clip.frames.data[t * fn + i] = f.data[i];
    FrameMeta m;
    m.shape = cls.shape;
    m.row = track[t] / 2;
    m.col = track[t] % 2;
    s.meta.push_back(m);
  }
  return s;
}

Sample make_image_sample(Shape shape, const CorpusConfig& cfg,
                         std::uint64_t image_seed, int j, const std::string& id) {
  int pos = j % 4;
  std::uint64_t noise = derive_seed(image_seed, "cell-noise", pos);
  Tensor<float> f = render_frame(shape, pos, noise, cfg.noise_amp, cfg.frame_size);
  Sample s;
  s.id = id;
  s.class_id = static_cast<int>(shape);
  s.label = shape_word(shape);
  s.clip = make_static_video(f, 1);
  FrameMeta m;
  m.shape = shape;
  m.row = pos / 2;
  m.col = pos % 2;
  s.meta.push_back(m);
  s.caption = pretrain_captions(shape, m.row, m.col)[j % 3];
  return s;
}

}  // namespace

Dataset build_corpus(const CorpusConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Dataset d;
  d.cfg = cfg;
  d.seed = seed;
  d.classes = class_table();

  if (cfg.heldout_ids.empty()) {
    // one held-out pattern per shape, a different pattern for each shape:
    // a perfect shape/pattern matching keyed by the seed
    int offset = static_cast<int>(derive_seed(seed, "heldout") % kNumPatterns);
    for (int s = 0; s < kNumShapes; ++s)
      d.heldout_ids.push_back(s * kNumPatterns + (s + offset) % kNumPatterns);
  } else {
    d.heldout_ids = cfg.heldout_ids;
    std::sort(d.heldout_ids.begin(), d.heldout_ids.end());
    d.heldout_ids.erase(std::unique(d.heldout_ids.begin(), d.heldout_ids.end()),
                        d.heldout_ids.end());
  }
  for (const ClassSpec& c : d.classes)
    if (std::find(d.heldout_ids.begin(), d.heldout_ids.end(), c.id) ==
        d.heldout_ids.end())
      d.seen_ids.push_back(c.id);
  if (d.seen_ids.empty()) throw InvalidConfig("corpus: no seen classes left");
  validate_split_atoms(d.classes, d.seen_ids, d.heldout_ids);

  // videos: seed keyed by (shape, pattern pair, k, split) so the two classes
  // of a confusable pair get frame-multiset twins in every split
  auto emit_videos = [&](const ClassSpec& cls, int count, const char* split,
                         std::vector<Sample>& out) {
    for (int k = 0; k < count; ++k) {
      std::uint64_t vseed =
          derive_seed(seed, std::string("video-") + split,
                      static_cast<int>(cls.shape) * 2 + pattern_pair(cls.pattern), k);
      std::string id = std::string(split) + "/c" + zero_pad(cls.id, 2) + "/k" +
                       zero_pad(k, 3);
      out.push_back(make_video_sample(cls, cfg, vseed, id));
    }
  };
  for (int id : d.seen_ids) {
    emit_videos(d.classes[id], cfg.train_per_class, "train", d.train);
    emit_videos(d.classes[id], cfg.test_per_class, "seen-test", d.seen_test);
  }
  for (int id : d.heldout_ids)
    emit_videos(d.classes[id], cfg.heldout_test_per_class, "held-test",
                d.heldout_test);

  // pretraining images
  auto emit_images = [&](int count, const char* split, std::vector<Sample>& out) {
    for (int s = 0; s < kNumShapes; ++s)
      for (int j = 0; j < count; ++j) {
        std::uint64_t iseed = derive_seed(seed, std::string("image-") + split, s, j);
        std::string id = std::string(split) + "/" +
                         shape_word(static_cast<Shape>(s)) + "/k" + zero_pad(j, 3);
        out.push_back(make_image_sample(static_cast<Shape>(s), cfg, iseed, j, id));
      }
  };
  emit_images(cfg.pretrain_per_shape, "pt-train", d.pretrain_train);
  emit_images(cfg.pretrain_test_per_shape, "pt-test", d.pretrain_test);

  d.vocab = build_vocabulary();
  return d;
}

}  // namespace ovclip
