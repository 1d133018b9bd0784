#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ovclip/checkpoint.hpp"
#include "ovclip/graph.hpp"

namespace ovclip {

// Dual-encoder model: a small pre-norm vision transformer over video patch
// tokens and a text transformer over word tokens, each followed by mean
// pooling, a linear projection into a shared embedding space, and L2
// normalization. A learned scalar (stored as "logit_scale") multiplies cosine
// similarities before the contrastive softmax.
//
// The vision tower's attention is frame-local with a temporal window: each
// token attends to all tokens of the frames within (window-1)/2 steps of its
// own frame, clipped at the clip boundary. window == 1 recovers per-frame
// attention; widening the window adds no parameters, so any checkpoint can be
// evaluated at any odd window. The window is therefore an evaluation/training
// setting, never part of the checkpoint.
//
// Text sequences are encoded from their non-pad prefix only: pad tokens enter
// neither attention nor pooling, which makes trailing padding exactly
// invisible to the encoder.

struct ModelConfig {
  int frame_size = 16;   // square frames, pixels
  int patch = 4;         // square patch edge
  int dim = 32;          // transformer width
  int heads = 2;
  int layers = 2;
  int embed_dim = 16;    // shared embedding space
  int vocab = 64;
  int max_len = 24;
  float logit_scale_init = 14.0f;
  float logit_scale_min = 1.0f;
  float logit_scale_max = 100.0f;
  // Init gain on the vision q/k projections. Near-uniform attention plus
  // mean pooling is blind to frame order (palindromic position weights make
  // reordered twins agree to first order), so the vision tower starts with
  // attention scores large enough to mix by content.
  float vision_qk_gain = 12.0f;

  int tokens_per_frame() const {
    int side = frame_size / patch;
    return side * side;
  }
  int patch_len() const { return patch * patch; }
  int mlp_hidden() const { return 2 * dim; }

  void validate() const {
    if (frame_size <= 0 || patch <= 0 || frame_size % patch != 0)
      throw InvalidConfig("model: frame_size must be a positive multiple of patch");
    if (dim <= 0 || heads <= 0 || dim % heads != 0)
      throw InvalidConfig("model: dim must be a positive multiple of heads");
    if (layers <= 0 || embed_dim <= 0 || vocab < 2 || max_len <= 0)
      throw InvalidConfig("model: bad layers/embed_dim/vocab/max_len");
    if (!(logit_scale_min <= logit_scale_init &&
          logit_scale_init <= logit_scale_max))
      throw InvalidConfig("model: logit_scale_init outside clamp range");
    if (!(vision_qk_gain > 0.0f))
      throw InvalidConfig("model: vision_qk_gain must be positive");
  }
};

// A video clip: T frames of H x W pixel intensities in [0,1], stored {T,H,W}.
struct VideoClip {
  Tensor<float> frames;  // shape {T, H, W}

  int t() const { return frames.shape[0]; }
  int h() const { return frames.shape[1]; }
  int w() const { return frames.shape[2]; }

  void validate() const {
    if (frames.rank() != 3) throw InvalidArgument("clip: frames must be rank 3");
    for (Eigen::Index i = 0; i < frames.numel(); ++i) {
      float v = frames.data[i];
      if (!(v >= 0.0f && v <= 1.0f))
        throw InvalidArgument("clip: pixel outside [0,1]");
    }
  }
};

// Token ids with explicit non-pad length; ids[0..len) are real tokens.
struct TextSequence {
  std::vector<int> ids;
  int len = 0;

  void validate(int vocab) const {
    if (len <= 0) throw InvalidArgument("text: sequence has no non-pad tokens");
    if (len > static_cast<int>(ids.size()))
      throw InvalidArgument("text: len exceeds id buffer");
    for (int i = 0; i < len; ++i)
      if (ids[i] < 0 || ids[i] >= vocab)
        throw InvalidArgument("text: token id out of vocabulary");
  }
};

namespace detail {

inline void tower_param_names(const std::string& prefix, const ModelConfig& cfg,
                              std::vector<std::pair<std::string, std::vector<int>>>& out) {
  for (int l = 0; l < cfg.layers; ++l) {
    std::string b = prefix + ".block" + std::to_string(l) + ".";
    out.push_back({b + "ln1.g", {cfg.dim}});
    out.push_back({b + "ln1.b", {cfg.dim}});
    for (const char* w : {"wq", "wk", "wv", "wo"})
      out.push_back({b + "attn." + w, {cfg.dim, cfg.dim}});
    for (const char* w : {"bq", "bk", "bv", "bo"})
      out.push_back({b + "attn." + w, {cfg.dim}});
    out.push_back({b + "ln2.g", {cfg.dim}});
    out.push_back({b + "ln2.b", {cfg.dim}});
    out.push_back({b + "mlp.w1", {cfg.dim, cfg.mlp_hidden()}});
    out.push_back({b + "mlp.b1", {cfg.mlp_hidden()}});
    out.push_back({b + "mlp.w2", {cfg.mlp_hidden(), cfg.dim}});
    out.push_back({b + "mlp.b2", {cfg.dim}});
  }
  out.push_back({prefix + ".ln_f.g", {cfg.dim}});
  out.push_back({prefix + ".ln_f.b", {cfg.dim}});
  out.push_back({prefix + ".proj", {cfg.dim, cfg.embed_dim}});
}

}  // namespace detail

// Full parameter name/shape listing for a config, in sorted order.
inline std::vector<std::pair<std::string, std::vector<int>>> param_spec(
    const ModelConfig& cfg) {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  out.push_back({"logit_scale", {1}});
  out.push_back({"vision.embed.patch", {cfg.patch_len(), cfg.dim}});
  out.push_back({"vision.embed.pos", {cfg.tokens_per_frame(), cfg.dim}});
  detail::tower_param_names("vision", cfg, out);
  out.push_back({"text.embed.tok", {cfg.vocab, cfg.dim}});
  out.push_back({"text.embed.pos", {cfg.max_len, cfg.dim}});
  detail::tower_param_names("text", cfg, out);
  std::sort(out.begin(), out.end());
  return out;
}

// Serialize the architecture into checkpoint metadata and back, so a saved
// checkpoint is self-describing.
inline void config_to_meta(const ModelConfig& cfg, std::map<std::string, std::string>& meta) {
  meta["model.frame_size"] = std::to_string(cfg.frame_size);
  meta["model.patch"] = std::to_string(cfg.patch);
  meta["model.dim"] = std::to_string(cfg.dim);
  meta["model.heads"] = std::to_string(cfg.heads);
  meta["model.layers"] = std::to_string(cfg.layers);
  meta["model.embed_dim"] = std::to_string(cfg.embed_dim);
  meta["model.vocab"] = std::to_string(cfg.vocab);
  meta["model.max_len"] = std::to_string(cfg.max_len);
}

inline ModelConfig config_from_meta(const std::map<std::string, std::string>& meta) {
  ModelConfig cfg;
  auto get = [&](const char* k, int& dst) {
    auto it = meta.find(k);
    if (it == meta.end())
      throw InvalidArgument(std::string("checkpoint metadata missing ") + k);
    dst = std::stoi(it->second);
  };
  get("model.frame_size", cfg.frame_size);
  get("model.patch", cfg.patch);
  get("model.dim", cfg.dim);
  get("model.heads", cfg.heads);
  get("model.layers", cfg.layers);
  get("model.embed_dim", cfg.embed_dim);
  get("model.vocab", cfg.vocab);
  get("model.max_len", cfg.max_len);
  cfg.validate();
  return cfg;
}

// Fresh random initialization. Each tensor draws from its own seed stream
// derived from (seed, name), so the values of one tensor never depend on how
// many draws another consumed.
inline Checkpoint init_dual_encoder(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Checkpoint c;
  for (const auto& [name, shape] : param_spec(cfg)) {
    std::mt19937_64 eng = make_engine(derive_seed(seed, name), "init");
    bool is_gain = name.ends_with(".g");
    bool is_bias = name.ends_with(".b") ||
                   name.find(".attn.b") != std::string::npos ||
                   name.find(".mlp.b") != std::string::npos;
    Tensor<float> t;
    if (name == "logit_scale")
      t = Tensor<float>::scalar(cfg.logit_scale_init);
    else if (is_gain)
      t = Tensor<float>::full(shape, 1.0f);
    else if (is_bias)
      t = Tensor<float>::zeros(shape);
    else
      t = Tensor<float>::randn(shape, eng, 0.02f);
    if (name.rfind("vision.", 0) == 0 &&
        (name.ends_with(".attn.wq") || name.ends_with(".attn.wk")))
      t.data *= cfg.vision_qk_gain;
    c.params.emplace_back(name, std::move(t));
  }
  config_to_meta(cfg, c.meta);
  c.meta["init.seed"] = std::to_string(seed);
  return c;
}

// Batched encoder graph over a parameter set. Build one per forward/backward
// pass; `params` holds the leaf refs so callers can read gradients back out
// by parameter name after backward().
template <typename S>
class EncoderGraph {
 public:
  using Ref = typename Graph<S>::Ref;
  using Block = typename Graph<S>::AttnBlock;

  EncoderGraph(const ModelConfig& cfg, const BasicCheckpoint<S>& weights)
      : cfg_(cfg) {
    cfg_.validate();
    for (const auto& [name, t] : weights.params)
      params_[name] = g.leaf(t);
  }

  Graph<S> g;

  Ref param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end())
      throw InvalidArgument("encoder: missing parameter " + name);
    return it->second;
  }
  const std::map<std::string, Ref>& param_refs() const { return params_; }

  // Gradients accumulated on the parameter leaves, as a checkpoint-shaped map.
  BasicCheckpoint<S> collect_grads() const {
    BasicCheckpoint<S> out;
    for (const auto& [name, ref] : params_)
      out.params.emplace_back(name, g.grad(ref));
    return out;
  }

  // Encode a batch of clips; all clips must share T/H/W. Returns a (B,
  // embed_dim) node of unit-norm rows.
  Ref encode_videos(std::span<const VideoClip> clips, int window) {
    check_window(window);
    if (clips.empty()) throw InvalidArgument("encode_videos: empty batch");
    int T = clips[0].t();
    const int P = cfg_.tokens_per_frame();
    const int side = cfg_.frame_size / cfg_.patch;
    for (const VideoClip& c : clips) {
      if (c.t() != T || c.h() != cfg_.frame_size || c.w() != cfg_.frame_size)
        throw InvalidArgument("encode_videos: clip shape mismatch");
    }
    int B = static_cast<int>(clips.size());
    // patchify: one row per token, row-major pixels within the patch
    Tensor<S> px = Tensor<S>::zeros({B * T * P, cfg_.patch_len()});
    auto pm = px.mat();
    std::vector<int> pos_ids(static_cast<std::size_t>(B) * T * P);
    Eigen::Index row = 0;
    for (int b = 0; b < B; ++b) {
      auto fm = clips[b].frames.mat();  // (T*H, W)
      for (int t = 0; t < T; ++t)
        for (int py = 0; py < side; ++py)
          for (int px_i = 0; px_i < side; ++px_i) {
            int k = 0;
            for (int dy = 0; dy < cfg_.patch; ++dy)
              for (int dx = 0; dx < cfg_.patch; ++dx)
                pm(row, k++) = static_cast<S>(
                    fm(t * cfg_.frame_size + py * cfg_.patch + dy,
                       px_i * cfg_.patch + dx));
            pos_ids[row] = py * side + px_i;
            ++row;
          }
    }
    Ref x = g.add(g.matmul(g.leaf(std::move(px)), param("vision.embed.patch")),
                  g.gather_rows(param("vision.embed.pos"), std::move(pos_ids)));
    // one attention block per (clip, frame): queries are the frame's tokens,
    // keys/values span the temporal window around it
    int half = (window - 1) / 2;
    std::vector<Block> blocks;
    blocks.reserve(static_cast<std::size_t>(B) * T);
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t) {
        int lo = std::max(0, t - half), hi = std::min(T - 1, t + half);
        blocks.push_back(Block{(b * T + t) * P, P, (b * T + lo) * P,
                               (hi - lo + 1) * P});
      }
    x = tower("vision", x, blocks);
    std::vector<int> starts(B), lens(B);
    for (int b = 0; b < B; ++b) {
      starts[b] = b * T * P;
      lens[b] = T * P;
    }
    return project("vision", x, starts, lens);
  }

  // Encode a batch of tokenized texts. Returns (B, embed_dim), unit rows.
  Ref encode_texts(std::span<const TextSequence> texts) {
    if (texts.empty()) throw InvalidArgument("encode_texts: empty batch");
    int total = 0;
    for (const TextSequence& s : texts) {
      s.validate(cfg_.vocab);
      if (s.len > cfg_.max_len)
        throw InvalidArgument("encode_texts: sequence longer than max_len");
      total += s.len;
    }
    std::vector<int> tok_ids, pos_ids, starts, lens;
    tok_ids.reserve(total);
    pos_ids.reserve(total);
    for (const TextSequence& s : texts) {
      starts.push_back(static_cast<int>(tok_ids.size()));
      lens.push_back(s.len);
      for (int i = 0; i < s.len; ++i) {
        tok_ids.push_back(s.ids[i]);
        pos_ids.push_back(i);
      }
    }
    Ref x = g.add(g.gather_rows(param("text.embed.tok"), tok_ids),
                  g.gather_rows(param("text.embed.pos"), pos_ids));
    std::vector<Block> blocks;
    blocks.reserve(texts.size());
    for (std::size_t b = 0; b < texts.size(); ++b)
      blocks.push_back(Block{starts[b], lens[b], starts[b], lens[b]});
    x = tower("text", x, blocks);
    return project("text", x, starts, lens);
  }

  // Cosine similarity logits scaled by the clamped logit scale.
  Ref similarity_logits(Ref video_emb, Ref text_emb) {
    Ref ls = g.clamp(param("logit_scale"), cfg_.logit_scale_min,
                     cfg_.logit_scale_max);
    return g.scale_by(g.matmul_nt(video_emb, text_emb), ls);
  }

 private:
  Ref tower(const std::string& p, Ref x, const std::vector<Block>& blocks) {
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string b = p + ".block" + std::to_string(l) + ".";
      Ref a = g.layernorm(x, param(b + "ln1.g"), param(b + "ln1.b"));
      Ref q = g.add_rowvec(g.matmul(a, param(b + "attn.wq")), param(b + "attn.bq"));
      Ref k = g.add_rowvec(g.matmul(a, param(b + "attn.wk")), param(b + "attn.bk"));
      Ref v = g.add_rowvec(g.matmul(a, param(b + "attn.wv")), param(b + "attn.bv"));
      Ref h = g.block_attention(q, k, v, blocks, cfg_.heads);
      Ref o = g.add_rowvec(g.matmul(h, param(b + "attn.wo")), param(b + "attn.bo"));
      x = g.add(x, o);
      Ref m = g.layernorm(x, param(b + "ln2.g"), param(b + "ln2.b"));
      m = g.add_rowvec(g.matmul(m, param(b + "mlp.w1")), param(b + "mlp.b1"));
      m = g.gelu(m);
      m = g.add_rowvec(g.matmul(m, param(b + "mlp.w2")), param(b + "mlp.b2"));
      x = g.add(x, m);
    }
    return x;
  }

  Ref project(const std::string& p, Ref x, const std::vector<int>& starts,
              const std::vector<int>& lens) {
    Ref f = g.layernorm(x, param(p + ".ln_f.g"), param(p + ".ln_f.b"));
    Ref pooled = g.group_mean_rows(f, starts, lens);
    return g.l2norm_rows(g.matmul(pooled, param(p + ".proj")));
  }

  ModelConfig cfg_;
  std::map<std::string, Ref> params_;
};

// Convenience single-clip / single-text encoders (forward only, float).
inline Tensor<float> encode_video(const ModelConfig& cfg, const Checkpoint& w,
                                  const VideoClip& clip, int window) {
  EncoderGraph<float> enc(cfg, w);
  auto r = enc.encode_videos(std::span<const VideoClip>(&clip, 1), window);
  Tensor<float> e = enc.g.val(r);
  e.shape = {cfg.embed_dim};
  return e;
}

inline Tensor<float> encode_text(const ModelConfig& cfg, const Checkpoint& w,
                                 const TextSequence& text) {
  EncoderGraph<float> enc(cfg, w);
  auto r = enc.encode_texts(std::span<const TextSequence>(&text, 1));
  Tensor<float> e = enc.g.val(r);
  e.shape = {cfg.embed_dim};
  return e;
}

// Cosine similarity of two unit-norm embeddings.
inline double similarity(const Tensor<float>& a, const Tensor<float>& b) {
  if (!a.same_shape(b)) throw InvalidArgument("similarity: shape mismatch");
  double na = std::sqrt(a.data.cast<double>().squaredNorm());
  double nb = std::sqrt(b.data.cast<double>().squaredNorm());
  if (na < 1e-12 || nb < 1e-12)
    throw InvalidArgument("similarity: zero-norm embedding");
  if (std::abs(na - 1.0) > 1e-3 || std::abs(nb - 1.0) > 1e-3)
    throw InvalidArgument("similarity: embeddings must be unit-norm");
  double dot = 0.0;
  for (Eigen::Index i = 0; i < a.numel(); ++i)
    dot += static_cast<double>(a.data[i]) * static_cast<double>(b.data[i]);
  return dot;
}

}  // namespace ovclip
