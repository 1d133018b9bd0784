#include "ovclip/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <span>

#include "ovclip/io_util.hpp"
#include "ovclip/rng.hpp"
#include "ovclip/weightspace.hpp"

namespace ovclip {

void Metrics::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(top1) || !in01(top5) || top1_std < 0.0 || top5_std < 0.0)
    throw NumericError("metrics: accuracy outside [0, 1]");
  if (top5 + 1e-12 < top1) throw NumericError("metrics: top5 below top1");
  for (const auto* rec : {&t2v_recall, &v2t_recall}) {
    double prev = 0.0;
    for (const auto& [k, v] : *rec) {
      if (!in01(v)) throw NumericError("metrics: recall outside [0, 1]");
      if (v + 1e-12 < prev) throw NumericError("metrics: recall decreasing in K");
      prev = v;
    }
  }
}

void LabeledClips::validate() const {
  if (clips.size() != class_ids.size())
    throw InvalidArgument("labeled clips: clip/label count mismatch");
  if (clips.empty()) throw InvalidArgument("labeled clips: empty");
}

int ClassPrompts::column_of(int class_id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), class_id);
  if (it == ids.end() || *it != class_id) return -1;
  return static_cast<int>(it - ids.begin());
}

void ClassPrompts::validate() const {
  if (ids.empty()) throw InvalidArgument("class prompts: empty class list");
  if (ids.size() != prompts.size())
    throw InvalidArgument("class prompts: id/prompt count mismatch");
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (ids[i] <= ids[i - 1])
      throw InvalidArgument("class prompts: ids must be ascending and unique");
}

// ---- dataset adapters ----

LabeledClips to_labeled(const std::vector<Sample>& samples) {
  LabeledClips out;
  for (const Sample& s : samples) {
    out.clips.push_back(s.clip);
    out.class_ids.push_back(s.class_id);
  }
  out.validate();
  return out;
}

ClassPrompts label_class_prompts(const std::vector<ClassSpec>& classes,
                                 const std::vector<int>& ids,
                                 const Vocabulary& vocab, int max_len) {
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  ClassPrompts out;
  for (int id : sorted) {
    auto it = std::find_if(classes.begin(), classes.end(),
                           [&](const ClassSpec& c) { return c.id == id; });
    if (it == classes.end())
      throw InvalidArgument("class prompts: unknown class id " + std::to_string(id));
    out.ids.push_back(id);
    out.prompts.push_back(tokenize(vocab, label_prompt(it->label), max_len));
  }
  out.validate();
  return out;
}

ClassPrompts image_class_prompts(const Vocabulary& vocab, int max_len) {
  ClassPrompts out;
  for (int s = 0; s < kNumShapes; ++s) {
    out.ids.push_back(s);
    out.prompts.push_back(tokenize(
        vocab, image_prompt(shape_word(static_cast<Shape>(s))), max_len));
  }
  return out;
}

LabeledClips filter_by_class(const LabeledClips& items,
                             const std::vector<int>& keep_ids) {
  items.validate();
  std::set<int> keep(keep_ids.begin(), keep_ids.end());
  LabeledClips out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (keep.count(items.class_ids[i])) {
      out.clips.push_back(items.clips[i]);
      out.class_ids.push_back(items.class_ids[i]);
    }
  if (out.clips.empty())
    throw InvalidArgument("filter_by_class: no items of the kept classes");
  return out;
}

ClassPrompts subset_prompts(const ClassPrompts& classes,
                            const std::vector<int>& keep_ids) {
  classes.validate();
  ClassPrompts out;
  std::vector<int> sorted = keep_ids;
  std::sort(sorted.begin(), sorted.end());
  for (int id : sorted) {
    int col = classes.column_of(id);
    if (col < 0)
      throw InvalidArgument("subset_prompts: class id " + std::to_string(id) +
                            " not in the prompt set");
    out.ids.push_back(id);
    out.prompts.push_back(classes.prompts[col]);
  }
  out.validate();
  return out;
}

// ---- embedding ----

namespace {

ModelConfig config_of(const Checkpoint& ckpt) {
  ModelConfig cfg = config_from_meta(ckpt.meta);
  cfg.validate();
  return cfg;
}

void append_rows(Tensor<float>& dst, Eigen::Index row0, const Tensor<float>& src) {
  for (Eigen::Index i = 0; i < src.numel(); ++i)
    dst.data[row0 * src.cols() + i] = src.data[i];
}

}  // namespace

Tensor<float> embed_clips(const Checkpoint& ckpt,
                          const std::vector<VideoClip>& clips, int window,
                          int batch) {
  if (clips.empty()) throw InvalidArgument("embed_clips: no clips");
  if (batch < 1) throw InvalidArgument("embed_clips: batch must be >= 1");
  ModelConfig cfg = config_of(ckpt);
  Tensor<float> out =
      Tensor<float>::zeros({static_cast<int>(clips.size()), cfg.embed_dim});
  for (std::size_t at = 0; at < clips.size(); at += batch) {
    std::size_t n = std::min<std::size_t>(batch, clips.size() - at);
    EncoderGraph<float> enc(cfg, ckpt);
    auto r = enc.encode_videos(
        std::span<const VideoClip>(clips.data() + at, n), window);
    append_rows(out, static_cast<Eigen::Index>(at), enc.g.val(r));
  }
  return out;
}

Tensor<float> embed_texts(const Checkpoint& ckpt,
                          const std::vector<TextSequence>& texts, int batch) {
  if (texts.empty()) throw InvalidArgument("embed_texts: no texts");
  if (batch < 1) throw InvalidArgument("embed_texts: batch must be >= 1");
  ModelConfig cfg = config_of(ckpt);
  Tensor<float> out =
      Tensor<float>::zeros({static_cast<int>(texts.size()), cfg.embed_dim});
  for (std::size_t at = 0; at < texts.size(); at += batch) {
    std::size_t n = std::min<std::size_t>(batch, texts.size() - at);
    EncoderGraph<float> enc(cfg, ckpt);
    auto r = enc.encode_texts(std::span<const TextSequence>(texts.data() + at, n));
    append_rows(out, static_cast<Eigen::Index>(at), enc.g.val(r));
  }
  return out;
}

VideoClip rotate_clip(const VideoClip& clip, int offset) {
  clip.validate();
  int T = clip.t();
  int shift = ((offset % T) + T) % T;
  if (shift == 0) return clip;
  VideoClip out;
  out.frames = Tensor<float>::zeros(clip.frames.shape);
  Eigen::Index fn = static_cast<Eigen::Index>(clip.h()) * clip.w();
  for (int t = 0; t < T; ++t) {
    int src = (t + shift) % T;
    for (Eigen::Index i = 0; i < fn; ++i)
      out.frames.data[t * fn + i] = clip.frames.data[src * fn + i];
  }
  return out;
}

Tensor<float> class_scores(const Checkpoint& ckpt,
                           const std::vector<VideoClip>& clips,
                           const std::vector<TextSequence>& class_texts,
                           int window, int views) {
  if (views < 1) throw InvalidArgument("class_scores: views must be >= 1");
  if (class_texts.empty()) throw InvalidArgument("class_scores: no classes");
  if (clips.empty()) throw InvalidArgument("class_scores: no clips");
  Tensor<float> temb = embed_texts(ckpt, class_texts);
  int T = clips[0].t();
  Tensor<float> scores = Tensor<float>::zeros(
      {static_cast<int>(clips.size()), static_cast<int>(class_texts.size())});
  for (int v = 0; v < views; ++v) {
    int offset = (v * T) / views;
    std::vector<VideoClip> shifted;
    shifted.reserve(clips.size());
    for (const VideoClip& c : clips) shifted.push_back(rotate_clip(c, offset));
    Tensor<float> vemb = embed_clips(ckpt, shifted, window);
    scores.mat() += (vemb.mat() * temb.mat().transpose()) / static_cast<float>(views);
  }
  return scores;
}

// ---- classification ----

namespace {

struct Counts {
  double top1 = 0.0, top5 = 0.0;
};

// scores: {n_items, n_classes}; truth: column index per item. Ties resolve
// to the lowest column.
Counts score_matrix_accuracy(const Tensor<float>& scores,
                             const std::vector<int>& truth) {
  Eigen::Index n = scores.rows(), m = scores.cols();
  if (static_cast<Eigen::Index>(truth.size()) != n)
    throw InvalidArgument("accuracy: truth/item count mismatch");
  int k5 = static_cast<int>(std::min<Eigen::Index>(5, m));
  Counts c;
  for (Eigen::Index i = 0; i < n; ++i) {
    int t = truth[i];
    if (t < 0 || t >= m) throw InvalidArgument("accuracy: truth column out of range");
    float st = scores.mat()(i, t);
    // rank of the true class under score-then-index ordering
    int ahead = 0;
    for (Eigen::Index j = 0; j < m; ++j)
      if (scores.mat()(i, j) > st || (scores.mat()(i, j) == st && j < t)) ++ahead;
    if (ahead == 0) c.top1 += 1.0;
    if (ahead < k5) c.top5 += 1.0;
  }
  c.top1 /= static_cast<double>(n);
  c.top5 /= static_cast<double>(n);
  return c;
}

std::vector<int> truth_columns(const LabeledClips& items,
                               const ClassPrompts& classes) {
  std::vector<int> truth;
  truth.reserve(items.size());
  for (int id : items.class_ids) {
    int col = classes.column_of(id);
    if (col < 0)
      throw InvalidArgument("classify: item class " + std::to_string(id) +
                            " missing from the class prompts");
    truth.push_back(col);
  }
  return truth;
}

Metrics from_repeats(const std::vector<Counts>& runs) {
  Metrics m;
  double n = static_cast<double>(runs.size());
  for (const Counts& c : runs) {
    m.top1 += c.top1 / n;
    m.top5 += c.top5 / n;
  }
  double v1 = 0.0, v5 = 0.0;
  for (const Counts& c : runs) {
    v1 += (c.top1 - m.top1) * (c.top1 - m.top1) / n;
    v5 += (c.top5 - m.top5) * (c.top5 - m.top5) / n;
  }
  m.top1_std = std::sqrt(v1);
  m.top5_std = std::sqrt(v5);
  m.validate();
  return m;
}

}  // namespace

Metrics classify_zero_shot(const Checkpoint& ckpt, const LabeledClips& items,
                           const ClassPrompts& classes, int window, int views) {
  items.validate();
  classes.validate();
  std::vector<int> truth = truth_columns(items, classes);
  Tensor<float> scores =
      class_scores(ckpt, items.clips, classes.prompts, window, views);
  return from_repeats({score_matrix_accuracy(scores, truth)});
}

// ---- protocols ----

Protocol protocol_from_name(const std::string& name) {
  if (name == "EP1") return Protocol::EP1;
  if (name == "EP2") return Protocol::EP2;
  if (name == "EP3") return Protocol::EP3;
  if (name == "K600SPLIT") return Protocol::K600Split;
  throw InvalidArgument("unknown protocol '" + name + "'");
}

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::EP1: return "EP1";
    case Protocol::EP2: return "EP2";
    case Protocol::EP3: return "EP3";
    case Protocol::K600Split: return "K600SPLIT";
  }
  throw InvalidArgument("bad protocol value");
}

namespace {

std::vector<int> pick_half(std::vector<int> pool, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  shuffle_inplace(pool, eng);
  pool.resize(pool.size() / 2);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

std::vector<std::vector<int>> protocol_class_subsets(
    Protocol p, const std::vector<int>& class_ids, int repeats,
    std::uint64_t seed) {
  if (class_ids.size() < 2)
    throw InvalidArgument("protocol: need at least 2 classes to subsample");
  const char* tag = nullptr;
  if (p == Protocol::EP1) {
    tag = "ep1-subset";
  } else if (p == Protocol::K600Split) {
    tag = "k600-subset";
    repeats = 3;
  } else {
    throw InvalidArgument("protocol: " + protocol_name(p) +
                          " does not subsample classes");
  }
  if (repeats < 1) throw InvalidArgument("protocol: repeats must be >= 1");
  std::vector<std::vector<int>> out;
  for (int r = 0; r < repeats; ++r)
    out.push_back(pick_half(class_ids, derive_seed(seed, tag, r)));
  return out;
}

std::vector<std::vector<int>> protocol_item_subsets(int n_items, int repeats,
                                                    std::uint64_t seed) {
  if (n_items < 2) throw InvalidArgument("protocol: need at least 2 items");
  if (repeats < 1) throw InvalidArgument("protocol: repeats must be >= 1");
  std::vector<int> all(n_items);
  for (int i = 0; i < n_items; ++i) all[i] = i;
  std::vector<std::vector<int>> out;
  for (int r = 0; r < repeats; ++r)
    out.push_back(pick_half(all, derive_seed(seed, "ep3-items", r)));
  return out;
}

Metrics run_protocol(Protocol p, const Checkpoint& ckpt,
                     const LabeledClips& items, const ClassPrompts& classes,
                     int window, int views, int repeats, std::uint64_t seed) {
  items.validate();
  classes.validate();
  std::vector<int> truth = truth_columns(items, classes);
  // one embedding pass; every subset restriction reuses the same scores
  Tensor<float> scores =
      class_scores(ckpt, items.clips, classes.prompts, window, views);

  auto restricted = [&](const std::vector<int>& keep_cols,
                        const std::vector<int>& keep_rows) -> Counts {
    Tensor<float> sub = Tensor<float>::zeros(
        {static_cast<int>(keep_rows.size()), static_cast<int>(keep_cols.size())});
    std::vector<int> sub_truth;
    for (std::size_t r = 0; r < keep_rows.size(); ++r) {
      int row = keep_rows[r];
      int tcol = -1;
      for (std::size_t c = 0; c < keep_cols.size(); ++c) {
        sub.mat()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            scores.mat()(row, keep_cols[c]);
        if (keep_cols[c] == truth[row]) tcol = static_cast<int>(c);
      }
      if (tcol < 0)
        throw InvalidArgument("protocol: an item's class left the subset");
      sub_truth.push_back(tcol);
    }
    return score_matrix_accuracy(sub, sub_truth);
  };

  std::vector<int> all_rows(items.size());
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = static_cast<int>(i);

  std::vector<Counts> runs;
  switch (p) {
    case Protocol::EP2:
      runs.push_back(score_matrix_accuracy(scores, truth));
      break;
    case Protocol::EP1:
    case Protocol::K600Split: {
      auto subsets = protocol_class_subsets(p, classes.ids, repeats, seed);
      for (const auto& ids : subsets) {
        std::vector<int> cols, rows;
        for (int id : ids) cols.push_back(classes.column_of(id));
        for (int row : all_rows)
          if (std::find(cols.begin(), cols.end(), truth[row]) != cols.end())
            rows.push_back(row);
        if (rows.empty())
          throw InvalidArgument("protocol: a class subset covers no items");
        runs.push_back(restricted(cols, rows));
      }
      break;
    }
    case Protocol::EP3: {
      auto subsets = protocol_item_subsets(static_cast<int>(items.size()), 3, seed);
      std::vector<int> all_cols;
      for (std::size_t c = 0; c < classes.size(); ++c)
        all_cols.push_back(static_cast<int>(c));
      for (const auto& rows : subsets) runs.push_back(restricted(all_cols, rows));
      break;
    }
  }
  return from_repeats(runs);
}

// ---- retrieval ----

Metrics retrieval_eval(const Checkpoint& ckpt,
                       const std::vector<VideoClip>& clips,
                       const std::vector<TextSequence>& captions,
                       const std::vector<int>& Ks, int window) {
  if (clips.size() != captions.size())
    throw InvalidArgument("retrieval: clip/caption count mismatch");
  if (clips.empty()) throw InvalidArgument("retrieval: no pairs");
  if (Ks.empty()) throw InvalidArgument("retrieval: no K values");
  for (std::size_t i = 0; i < captions.size(); ++i)
    for (std::size_t j = i + 1; j < captions.size(); ++j) {
      const auto& a = captions[i];
      const auto& b = captions[j];
      if (a.len == b.len &&
          std::equal(a.ids.begin(), a.ids.begin() + a.len, b.ids.begin()))
        throw InvalidArgument("retrieval: captions " + std::to_string(i) +
                              " and " + std::to_string(j) + " are identical");
    }
  int n = static_cast<int>(clips.size());
  for (int k : Ks)
    if (k < 1 || k > n)
      throw InvalidArgument("retrieval: K " + std::to_string(k) +
                            " outside 1.." + std::to_string(n));

  Tensor<float> vemb = embed_clips(ckpt, clips, window);
  Tensor<float> temb = embed_texts(ckpt, captions);
  Eigen::MatrixXf sims = vemb.mat() * temb.mat().transpose();  // (video, text)

  // rank of the true match under score-then-index ordering
  auto rank_of = [n](auto&& score_at, int truth) {
    float st = score_at(truth);
    int ahead = 0;
    for (int j = 0; j < n; ++j) {
      float sj = score_at(j);
      if (sj > st || (sj == st && j < truth)) ++ahead;
    }
    return ahead + 1;
  };

  Metrics m;
  for (int k : Ks) {
    int t2v = 0, v2t = 0;
    for (int i = 0; i < n; ++i) {
      if (rank_of([&](int v) { return sims(v, i); }, i) <= k) ++t2v;
      if (rank_of([&](int t) { return sims(i, t); }, i) <= k) ++v2t;
    }
    m.t2v_recall[k] = static_cast<double>(t2v) / n;
    m.v2t_recall[k] = static_cast<double>(v2t) / n;
  }
  m.top1 = m.t2v_recall.count(1) ? m.t2v_recall[1] : 0.0;
  m.top5 = std::max(m.top1, m.t2v_recall.count(5) ? m.t2v_recall[5] : m.top1);
  m.validate();
  return m;
}

// ---- trade-off sweep ----

std::vector<SweepRow> tradeoff_sweep(const Checkpoint& anchor,
                                     const Checkpoint& tuned,
                                     const std::vector<double>& grid,
                                     const TradeoffInputs& in, int window,
                                     int views) {
  if (grid.empty()) throw InvalidArgument("sweep: empty lambda grid");
  for (double lam : grid)
    if (lam < 0.0 || lam > 1.0)
      throw InvalidArgument("sweep: lambda outside [0, 1]");
  std::vector<SweepRow> rows;
  for (double lam : grid) {
    Checkpoint patched = final_patch(anchor, tuned, lam);
    SweepRow row;
    row.lam = lam;
    row.closeset_top1 = classify_zero_shot(patched, in.closeset_items,
                                           in.closeset_classes, window, views)
                            .top1;
    row.zeroshot_top1 = classify_zero_shot(patched, in.zeroshot_items,
                                           in.zeroshot_classes, window, views)
                            .top1;
    rows.push_back(row);
  }
  return rows;
}

// ---- image probe ----

Metrics image_task_eval(const Checkpoint& ckpt, const LabeledClips& images,
                        const ClassPrompts& classes) {
  images.validate();
  for (const VideoClip& c : images.clips)
    if (c.t() != 1)
      throw InvalidArgument("image probe: clips must be single-frame");
  return classify_zero_shot(ckpt, images, classes, /*window=*/1, /*views=*/1);
}

// ---- CSV output ----

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::string out = "lambda,closeset_top1,zeroshot_top1\n";
  for (const SweepRow& r : rows)
    out += fixed6(r.lam) + "," + fixed6(r.closeset_top1) + "," +
           fixed6(r.zeroshot_top1) + "\n";
  write_file_atomic(path, out);
}

void write_metrics_csv(const Metrics& m, const std::string& path) {
  std::string out = "metric,mean,std\n";
  out += "top1," + fixed6(m.top1) + "," + fixed6(m.top1_std) + "\n";
  out += "top5," + fixed6(m.top5) + "," + fixed6(m.top5_std) + "\n";
  for (const auto& [k, v] : m.t2v_recall)
    out += "t2v_recall@" + std::to_string(k) + "," + fixed6(v) + ",0.000000\n";
  for (const auto& [k, v] : m.v2t_recall)
    out += "v2t_recall@" + std::to_string(k) + "," + fixed6(v) + ",0.000000\n";
  write_file_atomic(path, out);
}

}  // namespace ovclip
