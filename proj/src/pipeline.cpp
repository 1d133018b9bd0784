#include "ovclip/pipeline.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <sstream>

#include "ovclip/captionkit.hpp"
#include "ovclip/io_util.hpp"
#include "ovclip/objectives.hpp"
#include "ovclip/ovck.hpp"

namespace ovclip {

namespace {

struct SplitRef {
  const char* name;
  std::vector<Sample> Dataset::*member;
};

constexpr SplitRef kSplits[] = {
    {"pretrain_train", &Dataset::pretrain_train},
    {"pretrain_test", &Dataset::pretrain_test},
    {"train", &Dataset::train},
    {"seen_test", &Dataset::seen_test},
    {"heldout_test", &Dataset::heldout_test},
};

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    std::string piece = s.substr(pos, next - pos);
    try {
      out.push_back(std::stoi(piece));
    } catch (const std::exception&) {
      throw FormatError("corpus: bad integer '" + piece + "'");
    }
    pos = next + 1;
  }
  return out;
}

// Two-column TSV reader shared by the corpus metadata files.
std::vector<std::pair<std::string, std::string>> read_tsv2(const std::string& path) {
  std::string text = read_file_text(path);
  std::vector<std::pair<std::string, std::string>> rows;
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
    if (tab == std::string::npos)
      throw FormatError(path + ": line " + std::to_string(lineno) +
                        " is not two tab-separated fields");
    rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return rows;
}

}  // namespace

void save_corpus(const Dataset& d, const std::string& dir) {
  ensure_dir(dir);
  ensure_dir(dir + "/splits");

  std::string manifest, positions;
  std::vector<std::pair<std::string, std::string>> pretrain_caps;
  for (const SplitRef& split : kSplits) {
    BasicCheckpoint<float> pack;
    pack.meta["corpus.split"] = split.name;
    for (const Sample& s : d.*split.member) {
      manifest += s.id + "\t" + split.name + "\t" + std::to_string(s.class_id) +
                  "\t" + s.label + "\n";
      std::vector<int> pos;
      for (const FrameMeta& m : s.meta) pos.push_back(m.row * 2 + m.col);
      positions += s.id + "\t" + join_ints(pos) + "\n";
      if (!s.caption.empty()) pretrain_caps.emplace_back(s.id, s.caption);
      pack.put(s.id, s.clip.frames);
    }
    save_checkpoint(pack, dir + "/splits/" + split.name + ".ovck");
  }
  write_file_atomic(dir + "/manifest.tsv", manifest);
  write_file_atomic(dir + "/positions.tsv", positions);
  save_caption_store(pretrain_caps, dir + "/pretrain_captions.tsv");

  std::string vocab;
  for (const std::string& w : d.vocab.words) vocab += w + "\n";
  write_file_atomic(dir + "/vocab.txt", vocab);

  std::string classes;
  for (const ClassSpec& c : d.classes)
    classes += std::to_string(c.id) + "\t" + c.label + "\n";
  write_file_atomic(dir + "/classes.tsv", classes);

  std::string config;
  auto kv = [&](const std::string& k, const std::string& v) {
    config += k + "\t" + v + "\n";
  };
  kv("frame_size", std::to_string(d.cfg.frame_size));
  kv("clip_len", std::to_string(d.cfg.clip_len));
  kv("noise_amp", std::to_string(d.cfg.noise_amp));
  kv("pretrain_per_shape", std::to_string(d.cfg.pretrain_per_shape));
  kv("pretrain_test_per_shape", std::to_string(d.cfg.pretrain_test_per_shape));
  kv("train_per_class", std::to_string(d.cfg.train_per_class));
  kv("test_per_class", std::to_string(d.cfg.test_per_class));
  kv("heldout_test_per_class", std::to_string(d.cfg.heldout_test_per_class));
  kv("seed", std::to_string(d.seed));
  kv("heldout_ids", join_ints(d.heldout_ids));
  write_file_atomic(dir + "/config.tsv", config);
}

Dataset load_corpus(const std::string& dir) {
  Dataset d;
  std::map<std::string, std::string> config;
  for (const auto& [k, v] : read_tsv2(dir + "/config.tsv")) config[k] = v;
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = config.find(k);
    if (it == config.end())
      throw FormatError("corpus config: missing key " + k);
    return it->second;
  };
  d.cfg.frame_size = std::stoi(need("frame_size"));
  d.cfg.clip_len = std::stoi(need("clip_len"));
  d.cfg.noise_amp = std::stof(need("noise_amp"));
  d.cfg.pretrain_per_shape = std::stoi(need("pretrain_per_shape"));
  d.cfg.pretrain_test_per_shape = std::stoi(need("pretrain_test_per_shape"));
  d.cfg.train_per_class = std::stoi(need("train_per_class"));
  d.cfg.test_per_class = std::stoi(need("test_per_class"));
  d.cfg.heldout_test_per_class = std::stoi(need("heldout_test_per_class"));
  d.seed = std::stoull(need("seed"));
  d.heldout_ids = split_ints(need("heldout_ids"));
  d.cfg.validate();

  d.classes = class_table();
  auto class_rows = read_tsv2(dir + "/classes.tsv");
  if (class_rows.size() != d.classes.size())
    throw FormatError("corpus: class table size mismatch");
  for (std::size_t i = 0; i < class_rows.size(); ++i)
    if (std::stoi(class_rows[i].first) != d.classes[i].id ||
        class_rows[i].second != d.classes[i].label)
      throw FormatError("corpus: class table disagrees with this build");

  for (const ClassSpec& c : d.classes)
    if (std::find(d.heldout_ids.begin(), d.heldout_ids.end(), c.id) ==
        d.heldout_ids.end())
      d.seen_ids.push_back(c.id);
  validate_split_atoms(d.classes, d.seen_ids, d.heldout_ids);

  std::string vocab_text = read_file_text(dir + "/vocab.txt");
  std::istringstream vin(vocab_text);
  std::string word;
  while (std::getline(vin, word))
    if (!word.empty()) d.vocab.words.push_back(word);
  if (d.vocab.words.empty() || d.vocab.words[0] != "<pad>")
    throw FormatError("corpus: vocabulary must start with the pad token");
  for (int i = 0; i < static_cast<int>(d.vocab.words.size()); ++i)
    d.vocab.index[d.vocab.words[i]] = i;

  std::map<std::string, std::vector<int>> positions;
  for (const auto& [id, pos] : read_tsv2(dir + "/positions.tsv"))
    positions[id] = split_ints(pos);
  std::map<std::string, std::string> captions =
      load_caption_store(dir + "/pretrain_captions.tsv");

  std::map<std::string, BasicCheckpoint<float>> packs;
  for (const SplitRef& split : kSplits)
    packs[split.name] =
        load_checkpoint(dir + "/splits/" + split.name + ".ovck");

  for (const auto& [id, rest] : read_tsv2(dir + "/manifest.tsv")) {
    // rest = split TAB class_id TAB label
    std::size_t t1 = rest.find('\t');
    std::size_t t2 = rest.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw FormatError("corpus manifest: row for " + id + " is malformed");
    std::string split = rest.substr(0, t1);
    int class_id = std::stoi(rest.substr(t1 + 1, t2 - t1 - 1));
    std::string label = rest.substr(t2 + 1);

    const SplitRef* ref = nullptr;
    for (const SplitRef& s : kSplits)
      if (split == s.name) ref = &s;
    if (!ref) throw FormatError("corpus manifest: unknown split " + split);

    const Tensor<float>* frames = packs[split].find(id);
    if (!frames)
      throw FormatError("corpus: sample " + id + " missing from " + split + ".ovck");
    auto pit = positions.find(id);
    if (pit == positions.end())
      throw FormatError("corpus: sample " + id + " has no positions row");

    Sample s;
    s.id = id;
    s.class_id = class_id;
    s.label = label;
    s.clip.frames = *frames;
    s.clip.validate();
    bool image = split == "pretrain_train" || split == "pretrain_test";
    Shape shape = image ? static_cast<Shape>(class_id)
                        : d.class_by_id(class_id).shape;
    if (static_cast<int>(pit->second.size()) != s.clip.t())
      throw FormatError("corpus: sample " + id + " position/frame mismatch");
    for (int pos : pit->second) {
      if (pos < 0 || pos > 3)
        throw FormatError("corpus: sample " + id + " has a bad position");
      s.meta.push_back({shape, pos / 2, pos % 2});
    }
    if (image) {
      auto cit = captions.find(id);
      if (cit == captions.end())
        throw FormatError("corpus: pretraining sample " + id + " has no caption");
      s.caption = cit->second;
    }
    (d.*ref->member).push_back(std::move(s));
  }
  for (const SplitRef& split : kSplits)
    if ((d.*split.member).empty())
      throw FormatError(std::string("corpus: split ") + split.name + " is empty");
  return d;
}

std::string file_digest_hex(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_file_bytes(path);
  return hash_hex(fnv1a64(bytes.data(), bytes.size()));
}

std::string corpus_digest(const std::string& dir) {
  std::uint64_t h = 1469598103934665603ull;  // FNV offset basis
  auto mix = [&](const std::string& rel) {
    std::vector<std::uint8_t> bytes = read_file_bytes(dir + "/" + rel);
    h = fnv1a64(rel.data(), rel.size(), h);
    h = fnv1a64(bytes.data(), bytes.size(), h);
  };
  mix("manifest.tsv");
  mix("positions.tsv");
  mix("pretrain_captions.tsv");
  mix("vocab.txt");
  mix("classes.tsv");
  mix("config.tsv");
  for (const SplitRef& split : kSplits)
    mix(std::string("splits/") + split.name + ".ovck");
  return hash_hex(h);
}

// ---- phases ----

namespace {

// Clip + tokenized text batches behind a shared encode/contrast step.
LossGrad<float> contrastive_batch(const ModelConfig& mcfg, const Checkpoint& theta,
                                  const std::vector<VideoClip>& clips,
                                  const std::vector<TextSequence>* label_texts,
                                  const std::vector<TextSequence>* caption_texts,
                                  double label_w, double caption_w, int window) {
  EncoderGraph<float> enc(mcfg, theta);
  LossGrad<float> out;
  if (label_w == 0.0 && caption_w == 0.0) {
    out.grad = zeros_like(theta);
    return out;
  }
  auto vemb = enc.encode_videos(std::span<const VideoClip>(clips), window);
  typename Graph<float>::Ref total{};
  bool have = false;
  auto add_term = [&](const std::vector<TextSequence>& texts, double w) {
    auto temb = enc.encode_texts(std::span<const TextSequence>(texts));
    auto logits = enc.similarity_logits(vemb, temb);
    auto term = enc.g.scale(contrastive_from_logits(enc.g, logits),
                            static_cast<float>(w));
    total = have ? enc.g.add(total, term) : term;
    have = true;
  };
  if (label_w != 0.0) add_term(*label_texts, label_w);
  if (caption_w != 0.0) add_term(*caption_texts, caption_w);
  enc.g.backward(total);
  out.loss = static_cast<double>(enc.g.val(total).data[0]);
  out.grad = enc.collect_grads();
  return out;
}

}  // namespace

Checkpoint pretrain_phase(const ModelConfig& mcfg, const Dataset& data,
                          const TrainConfig& cfg, const StepHook& hook) {
  mcfg.validate();
  cfg.validate();
  if (mcfg.vocab != data.vocab.size())
    throw InvalidConfig("pretrain: model vocab " + std::to_string(mcfg.vocab) +
                        " != corpus vocabulary " +
                        std::to_string(data.vocab.size()));
  if (cfg.freeze_text)
    throw InvalidConfig("pretrain: the text tower must train (freeze_text off)");
  if (cfg.gamma != 0.0 || cfg.iwr_C != 0.0 || cfg.iwr_R != 0.0 || cfg.swa)
    throw InvalidConfig("pretrain: IWR/SWA/caption weighting are fine-tuning "
                        "machinery; disable them here");
  const std::vector<Sample>& samples = data.pretrain_train;
  if (samples.empty()) throw InvalidArgument("pretrain: no pretraining samples");

  std::vector<VideoClip> clips;
  std::vector<TextSequence> texts;
  for (const Sample& s : samples) {
    clips.push_back(s.clip);
    texts.push_back(tokenize(data.vocab, s.caption, mcfg.max_len));
  }

  BatchGradFn fn = [&](const Checkpoint& theta, const std::vector<int>& batch,
                       double label_w, double /*caption_w*/) {
    std::vector<VideoClip> bc;
    std::vector<TextSequence> bt;
    for (int i : batch) {
      bc.push_back(clips.at(i));
      bt.push_back(texts.at(i));
    }
    return contrastive_batch(mcfg, theta, bc, &bt, nullptr, label_w, 0.0,
                             cfg.window);
  };

  Checkpoint init = init_dual_encoder(mcfg, cfg.seed);
  TrainResult r = train_loop(init, init, static_cast<int>(samples.size()), cfg,
                             fn, hook);
  return r.theta;
}

BatchGradFn finetune_grad_fn(const ModelConfig& mcfg, const Dataset& data,
                             const std::map<std::string, std::string>& captions,
                             int window) {
  mcfg.validate();
  check_window(window);
  if (data.train.empty()) throw InvalidArgument("finetune: no training samples");

  auto clips = std::make_shared<std::vector<VideoClip>>();
  auto label_texts = std::make_shared<std::vector<TextSequence>>();
  // nullopt marks a sample with no caption; touching it with caption_w != 0 throws
  auto caption_texts = std::make_shared<std::vector<std::optional<TextSequence>>>();
  auto ids = std::make_shared<std::vector<std::string>>();
  for (const Sample& s : data.train) {
    clips->push_back(s.clip);
    label_texts->push_back(tokenize(data.vocab, label_prompt(s.label), mcfg.max_len));
    auto it = captions.find(s.id);
    if (it == captions.end())
      caption_texts->push_back(std::nullopt);
    else
      caption_texts->push_back(tokenize(data.vocab, it->second, mcfg.max_len));
    ids->push_back(s.id);
  }

  return [=](const Checkpoint& theta, const std::vector<int>& batch,
             double label_w, double caption_w) {
    std::vector<VideoClip> bc;
    std::vector<TextSequence> bl, bcap;
    for (int i : batch) {
      bc.push_back(clips->at(i));
      bl.push_back(label_texts->at(i));
      if (caption_w != 0.0) {
        const auto& maybe = caption_texts->at(i);
        if (!maybe)
          throw InvalidArgument("finetune: sample " + ids->at(i) +
                                " has no caption but the caption loss is on");
        bcap.push_back(*maybe);
      }
    }
    return contrastive_batch(mcfg, theta, bc, &bl, &bcap, label_w, caption_w,
                             window);
  };
}

TrainResult finetune_phase(const ModelConfig& mcfg, const Dataset& data,
                           const std::map<std::string, std::string>& captions,
                           const Checkpoint& anchor, const TrainConfig& cfg,
                           const StepHook& hook) {
  cfg.validate();
  if (cfg.gamma > 0.0)
    for (const Sample& s : data.train)
      if (!captions.count(s.id))
        throw InvalidArgument("finetune: sample " + s.id +
                              " has no caption but gamma > 0");
  BatchGradFn fn = finetune_grad_fn(mcfg, data, captions, cfg.window);
  return train_loop(anchor, anchor, static_cast<int>(data.train.size()), cfg,
                    fn, hook);
}

void write_run_manifest(const std::string& path,
                        const std::map<std::string, std::string>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) {
    if (k.empty() || k.find_first_of("\t\n") != std::string::npos ||
        v.find_first_of("\t\n") != std::string::npos)
      throw InvalidArgument("run manifest: keys/values must be tab- and "
                            "newline-free");
    out += k + "\t" + v + "\n";
  }
  write_file_atomic(path, out);
}

}  // namespace ovclip
