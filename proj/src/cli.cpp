#include "ovclip/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ovclip/captionkit.hpp"
#include "ovclip/evalkit.hpp"
#include "ovclip/ovck.hpp"
#include "ovclip/pipeline.hpp"

// CLI11 last: it pulls in platform headers whose macros must not reach the
// library headers above.
#include <CLI11.hpp>

namespace ovclip {

namespace {

// exit codes: 0 success, 2 usage/config, 3 numeric failure, 4 I/O or backend
constexpr int kOkExit = 0;
constexpr int kUsageExit = 2;
constexpr int kNumericExit = 3;
constexpr int kIoExit = 4;

std::string describe_config(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + " ";
  if (!out.empty()) out.pop_back();
  return out;
}

// 0:1:0.1 style ranges or comma lists.
std::vector<double> parse_lambda_grid(const std::string& spec) {
  std::vector<double> out;
  auto parse_num = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InvalidArgument("lambda grid: bad number '" + s + "'");
    }
  };
  if (spec.find(':') != std::string::npos) {
    std::size_t c1 = spec.find(':');
    std::size_t c2 = spec.find(':', c1 + 1);
    if (c2 == std::string::npos)
      throw InvalidArgument("lambda grid: ranges are start:stop:step");
    double start = parse_num(spec.substr(0, c1));
    double stop = parse_num(spec.substr(c1 + 1, c2 - c1 - 1));
    double step = parse_num(spec.substr(c2 + 1));
    if (step <= 0.0) throw InvalidArgument("lambda grid: step must be > 0");
    if (stop < start) throw InvalidArgument("lambda grid: stop below start");
    for (int i = 0;; ++i) {
      double v = start + i * step;
      if (v > stop + 1e-9) break;
      out.push_back(std::min(v, stop));
    }
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      std::size_t next = spec.find(',', pos);
      if (next == std::string::npos) next = spec.size();
      out.push_back(parse_num(spec.substr(pos, next - pos)));
      pos = next + 1;
    }
  }
  if (out.empty()) throw InvalidArgument("lambda grid: empty");
  for (double v : out)
    if (v < 0.0 || v > 1.0)
      throw InvalidArgument("lambda grid: values must lie in [0, 1]");
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

ModelConfig model_config_for(const Dataset& data, int patch, int dim, int heads,
                             int layers, int embed_dim, int max_len) {
  ModelConfig m;
  m.frame_size = data.cfg.frame_size;
  m.patch = patch;
  m.dim = dim;
  m.heads = heads;
  m.layers = layers;
  m.embed_dim = embed_dim;
  m.vocab = data.vocab.size();
  m.max_len = max_len;
  m.validate();
  return m;
}

const std::vector<Sample>& split_of(const Dataset& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "seen-test") return d.seen_test;
  if (name == "heldout-test") return d.heldout_test;
  if (name == "pretrain-train") return d.pretrain_train;
  if (name == "pretrain-test") return d.pretrain_test;
  throw InvalidArgument("unknown split '" + name + "'");
}

// The class prompt set covering a sample split.
ClassPrompts prompts_for_split(const Dataset& d, const std::string& name,
                               int max_len) {
  if (name == "pretrain-train" || name == "pretrain-test")
    return image_class_prompts(d.vocab, max_len);
  if (name == "train" || name == "seen-test")
    return label_class_prompts(d.classes, d.seen_ids, d.vocab, max_len);
  if (name == "heldout-test")
    return label_class_prompts(d.classes, d.heldout_ids, d.vocab, max_len);
  throw InvalidArgument("unknown split '" + name + "'");
}

// Tokenized captions for a split's samples, from a caption store.
std::vector<TextSequence> captions_for(const Dataset& d,
                                       const std::vector<Sample>& samples,
                                       const std::string& store_path,
                                       int max_len) {
  std::map<std::string, std::string> store = load_caption_store(store_path);
  std::vector<TextSequence> out;
  for (const Sample& s : samples) {
    auto it = store.find(s.id);
    if (it == store.end())
      throw InvalidArgument("caption store has no row for " + s.id);
    out.push_back(tokenize(d.vocab, it->second, max_len));
  }
  return out;
}

void log_line(const std::string& s) { std::printf("%s\n", s.c_str()); }

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"dual-encoder video adaptation workbench"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);

  // ---- gen-corpus ----
  auto* gen = app.add_subcommand("gen-corpus", "render the synthetic corpus to a directory");
  std::string gen_out;
  std::uint64_t gen_seed = 1;
  CorpusConfig ccfg;
  std::vector<int> gen_heldout;
  gen->add_option("--out", gen_out, "output corpus directory")->required();
  gen->add_option("--seed", gen_seed, "corpus seed");
  gen->add_option("--frame-size", ccfg.frame_size, "frame side length");
  gen->add_option("--noise-amp", ccfg.noise_amp, "pixel noise amplitude");
  gen->add_option("--pretrain-per-shape", ccfg.pretrain_per_shape, "pretraining images per shape");
  gen->add_option("--pretrain-test-per-shape", ccfg.pretrain_test_per_shape, "held-out images per shape");
  gen->add_option("--train-per-class", ccfg.train_per_class, "training clips per seen class");
  gen->add_option("--test-per-class", ccfg.test_per_class, "test clips per seen class");
  gen->add_option("--heldout-test-per-class", ccfg.heldout_test_per_class, "test clips per held-out class");
  gen->add_option("--heldout-ids", gen_heldout, "explicit held-out class ids");

  // ---- pretrain ----
  auto* pre = app.add_subcommand("pretrain", "phase A: image/caption contrastive pretraining");
  std::string pre_corpus, pre_out;
  TrainConfig pre_cfg;
  pre_cfg.freeze_text = false;
  pre_cfg.window = 1;
  pre_cfg.epochs = 40;
  pre_cfg.lr_peak = 0.001;
  int pre_patch = 4, pre_dim = 32, pre_heads = 2, pre_layers = 2,
      pre_embed = 16, pre_maxlen = 24;
  pre->add_option("--corpus", pre_corpus, "corpus directory")->required();
  pre->add_option("--out", pre_out, "output checkpoint path")->required();
  pre->add_option("--seed", pre_cfg.seed, "init + batch-order seed");
  pre->add_option("--epochs", pre_cfg.epochs, "training epochs");
  pre->add_option("--batch", pre_cfg.batch, "batch size");
  pre->add_option("--lr-peak", pre_cfg.lr_peak, "post-warmup peak learning rate");
  pre->add_option("--lr-floor", pre_cfg.lr_floor, "warmup/floor learning rate");
  pre->add_option("--warmup-epochs", pre_cfg.warmup_epochs, "epochs at the floor rate");
  pre->add_option("--momentum", pre_cfg.momentum, "SGD momentum");
  pre->add_option("--patch", pre_patch, "vision patch size");
  pre->add_option("--dim", pre_dim, "transformer width");
  pre->add_option("--heads", pre_heads, "attention heads");
  pre->add_option("--layers", pre_layers, "transformer depth per tower");
  pre->add_option("--embed-dim", pre_embed, "joint embedding dimension");
  pre->add_option("--max-len", pre_maxlen, "text length limit");

  // ---- caption ----
  auto* cap = app.add_subcommand("caption", "caption videos through a summarizer backend");
  std::string cap_corpus, cap_out, cap_split = "train", cap_backend = "stub";
  HttpBackendConfig cap_http;
  cap_http.endpoint = "";
  cap_http.model = "";
  cap_http.token_env = "OVCLIP_CAPTION_TOKEN";
  cap->add_option("--corpus", cap_corpus, "corpus directory")->required();
  cap->add_option("--out", cap_out, "caption TSV output")->required();
  cap->add_option("--split", cap_split, "which split to caption")
      ->check(CLI::IsMember({"train", "seen-test", "heldout-test"}));
  cap->add_option("--backend", cap_backend, "stub or service")
      ->check(CLI::IsMember({"stub", "service"}));
  cap->add_option("--endpoint", cap_http.endpoint, "chat-completions endpoint URL");
  cap->add_option("--model", cap_http.model, "service model name");
  cap->add_option("--token-env", cap_http.token_env,
                  "environment variable holding the bearer token (the value is never logged)");
  cap->add_option("--max-attempts", cap_http.max_attempts, "retries per request");
  cap->add_option("--backoff-ms", cap_http.backoff_ms, "initial retry backoff");

  // ---- finetune ----
  auto* fin = app.add_subcommand("finetune", "phase B: fine-tune on videos from an anchor");
  std::string fin_corpus, fin_anchor, fin_out, fin_swa_out, fin_captions;
  TrainConfig fin_cfg;
  fin_cfg.epochs = 60;
  fin_cfg.lr_peak = 0.003;
  fin_cfg.momentum = 0.9;
  bool fin_unfreeze_text = false;
  fin->add_option("--corpus", fin_corpus, "corpus directory")->required();
  fin->add_option("--anchor", fin_anchor, "phase-A checkpoint (theta_A)")->required();
  fin->add_option("--out", fin_out, "fine-tuned checkpoint output")->required();
  fin->add_option("--swa-out", fin_swa_out, "weight-average checkpoint output (with --swa)");
  fin->add_option("--captions", fin_captions, "caption TSV for the caption loss");
  fin->add_option("--seed", fin_cfg.seed, "batch-order + alpha seed");
  fin->add_option("--epochs", fin_cfg.epochs, "training epochs");
  fin->add_option("--batch", fin_cfg.batch, "batch size");
  fin->add_option("--lr-peak", fin_cfg.lr_peak, "post-warmup peak learning rate");
  fin->add_option("--lr-floor", fin_cfg.lr_floor, "warmup/floor learning rate");
  fin->add_option("--warmup-epochs", fin_cfg.warmup_epochs, "epochs at the floor rate");
  fin->add_option("--window", fin_cfg.window, "temporal attention window (odd)");
  fin->add_option("--iwr-R", fin_cfg.iwr_R, "interpolation range upper bound");
  fin->add_option("--iwr-C", fin_cfg.iwr_C, "interpolated-gradient weight");
  fin->add_option("--gamma", fin_cfg.gamma, "caption loss weight");
  fin->add_flag("--iwr-caption-at-theta", fin_cfg.iwr_caption_at_theta,
                "keep the caption term of the interpolated loss at theta");
  fin->add_flag("--swa", fin_cfg.swa, "average checkpoints along the trajectory");
  fin->add_option("--swa-start-epochs", fin_cfg.swa_start_epochs,
                  "epochs after warmup before averaging starts");
  fin->add_option("--swa-cycle-epochs", fin_cfg.swa_cycle_epochs,
                  "epochs between absorbed checkpoints");
  fin->add_option("--momentum", fin_cfg.momentum, "SGD momentum");
  fin->add_option("--l2-anchor", fin_cfg.l2_anchor_mu,
                  "quadratic pull toward the anchor weights");
  fin->add_flag("--unfreeze-text", fin_unfreeze_text, "let the text tower train");

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "zero-shot classification/retrieval/image probes");
  std::string ev_corpus, ev_ckpt, ev_out, ev_task = "classify",
              ev_split = "heldout-test", ev_protocol = "EP2", ev_captions;
  int ev_window = 3, ev_views = 1, ev_repeats = 10;
  std::uint64_t ev_seed = 1;
  ev->add_option("--corpus", ev_corpus, "corpus directory")->required();
  ev->add_option("--ckpt", ev_ckpt, "checkpoint to evaluate")->required();
  ev->add_option("--out", ev_out, "metrics CSV output")->required();
  ev->add_option("--task", ev_task, "what to evaluate")
      ->check(CLI::IsMember({"classify", "retrieval", "image"}));
  ev->add_option("--split", ev_split, "sample split");
  ev->add_option("--protocol", ev_protocol, "classification protocol")
      ->check(CLI::IsMember({"EP1", "EP2", "EP3", "K600SPLIT"}));
  ev->add_option("--window", ev_window, "temporal attention window");
  ev->add_option("--views", ev_views, "temporal views to average");
  ev->add_option("--repeats", ev_repeats, "EP1 subset count");
  ev->add_option("--seed", ev_seed, "protocol subset seed");
  ev->add_option("--captions", ev_captions, "caption TSV (retrieval task)");

  // ---- sweep ----
  auto* sw = app.add_subcommand("sweep", "interpolation trade-off curve");
  std::string sw_corpus, sw_anchor, sw_tuned, sw_out, sw_grid = "0:1:0.1";
  std::string sw_closeset = "seen-test", sw_zeroshot = "heldout-test";
  int sw_window = 3, sw_views = 1;
  sw->add_option("--corpus", sw_corpus, "corpus directory")->required();
  sw->add_option("--anchor", sw_anchor, "theta_A checkpoint")->required();
  sw->add_option("--tuned", sw_tuned, "fine-tuned checkpoint")->required();
  sw->add_option("--out", sw_out, "sweep CSV output")->required();
  sw->add_option("--lambda-grid", sw_grid, "start:stop:step or comma list");
  sw->add_option("--closeset-split", sw_closeset, "close-set sample split");
  sw->add_option("--zeroshot-split", sw_zeroshot, "zero-shot sample split");
  sw->add_option("--window", sw_window, "temporal attention window");
  sw->add_option("--views", sw_views, "temporal views to average");

  // ---- interp ----
  auto* in = app.add_subcommand("interp", "blend two checkpoints");
  std::string in_a, in_b, in_out;
  double in_lambda = 0.5;
  in->add_option("a", in_a, "checkpoint at lambda = 1")->required();
  in->add_option("b", in_b, "checkpoint at lambda = 0")->required();
  in->add_option("--lambda", in_lambda, "blend weight on the first checkpoint");
  in->add_option("-o,--out", in_out, "output checkpoint path")->required();

  // ---- inspect-ckpt ----
  auto* insp = app.add_subcommand("inspect-ckpt", "print checkpoint contents");
  std::string insp_path;
  insp->add_option("path", insp_path, "checkpoint to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message and usage hint
    return kUsageExit;
  }

  try {
    if (gen->parsed()) {
      ccfg.heldout_ids = gen_heldout;
      ccfg.validate();
      Dataset d = build_corpus(ccfg, gen_seed);
      save_corpus(d, gen_out);
      write_run_manifest(
          gen_out + "/run_manifest.tsv",
          {{"command", "gen-corpus"},
           {"seed", std::to_string(gen_seed)},
           {"config", describe_config({{"frame_size", std::to_string(ccfg.frame_size)},
                                       {"noise_amp", fmt_double(ccfg.noise_amp)},
                                       {"train_per_class", std::to_string(ccfg.train_per_class)}})},
           {"corpus_digest", corpus_digest(gen_out)}});
      log_line("corpus written to " + gen_out + " (" +
               std::to_string(d.train.size()) + " train clips, " +
               std::to_string(d.pretrain_train.size()) + " pretraining images)");
      return kOkExit;
    }

    if (pre->parsed()) {
      pre_cfg.validate();
      Dataset d = load_corpus(pre_corpus);
      ModelConfig m = model_config_for(d, pre_patch, pre_dim, pre_heads,
                                       pre_layers, pre_embed, pre_maxlen);
      long logged = 0;
      Checkpoint theta = pretrain_phase(
          m, d, pre_cfg, [&](long step, double lr, double loss, const Checkpoint&) {
            if (step == 1 || step % 50 == 0)
              log_line("pretrain step " + std::to_string(step) + " lr " +
                       fmt_double(lr) + " loss " + fmt_double(loss));
            logged = step;
          });
      save_checkpoint(theta, pre_out);
      write_run_manifest(pre_out + ".manifest.tsv",
                         {{"command", "pretrain"},
                          {"seed", std::to_string(pre_cfg.seed)},
                          {"steps", std::to_string(logged)},
                          {"corpus_digest", corpus_digest(pre_corpus)},
                          {"output_hash", hash_hex(content_hash(theta))}});
      log_line("pretrained checkpoint written to " + pre_out);
      return kOkExit;
    }

    if (cap->parsed()) {
      Dataset d = load_corpus(cap_corpus);
      std::unique_ptr<CaptionBackend> backend;
      if (cap_backend == "stub") {
        backend = std::make_unique<StubSummarizer>();
      } else {
        if (cap_http.endpoint.empty() || cap_http.model.empty())
          throw InvalidConfig("caption: --endpoint and --model are required "
                              "with --backend service");
        backend = std::make_unique<HttpSummarizer>(cap_http);
      }
      const std::vector<Sample>& samples = split_of(d, cap_split);
      auto rows = caption_samples(samples, *backend);
      save_caption_store(rows, cap_out);
      write_run_manifest(cap_out + ".manifest.tsv",
                         {{"command", "caption"},
                          {"backend", backend->name()},
                          {"split", cap_split},
                          {"corpus_digest", corpus_digest(cap_corpus)},
                          {"output_digest", file_digest_hex(cap_out)}});
      log_line("wrote " + std::to_string(rows.size()) + " captions (" +
               backend->name() + ") to " + cap_out);
      return kOkExit;
    }

    if (fin->parsed()) {
      fin_cfg.freeze_text = !fin_unfreeze_text;
      fin_cfg.validate();
      Dataset d = load_corpus(fin_corpus);
      Checkpoint anchor = load_checkpoint(fin_anchor);
      ModelConfig m = config_from_meta(anchor.meta);
      std::map<std::string, std::string> captions;
      if (!fin_captions.empty()) captions = load_caption_store(fin_captions);
      TrainResult r = finetune_phase(
          m, d, captions, anchor, fin_cfg,
          [&](long step, double lr, double loss, const Checkpoint&) {
            if (step == 1 || step % 50 == 0)
              log_line("finetune step " + std::to_string(step) + " lr " +
                       fmt_double(lr) + " loss " + fmt_double(loss));
          });
      save_checkpoint(r.theta, fin_out);
      std::map<std::string, std::string> manifest{
          {"command", "finetune"},
          {"seed", std::to_string(fin_cfg.seed)},
          {"steps", std::to_string(r.steps)},
          {"anchor_hash", hash_hex(content_hash(anchor))},
          {"corpus_digest", corpus_digest(fin_corpus)},
          {"config",
           describe_config({{"iwr_R", fmt_double(fin_cfg.iwr_R)},
                            {"iwr_C", fmt_double(fin_cfg.iwr_C)},
                            {"gamma", fmt_double(fin_cfg.gamma)},
                            {"window", std::to_string(fin_cfg.window)},
                            {"epochs", std::to_string(fin_cfg.epochs)},
                            {"swa", fin_cfg.swa ? "on" : "off"}})},
          {"output_hash", hash_hex(content_hash(r.theta))}};
      if (fin_cfg.swa) {
        std::string swa_path =
            fin_swa_out.empty() ? fin_out + ".swa.ovck" : fin_swa_out;
        save_checkpoint(r.swa_mean, swa_path);
        manifest["swa_out"] = swa_path;
        manifest["swa_count"] = std::to_string(r.swa_count);
        log_line("weight average (" + std::to_string(r.swa_count) +
                 " absorbed) written to " + swa_path);
      }
      write_run_manifest(fin_out + ".manifest.tsv", manifest);
      log_line("fine-tuned checkpoint written to " + fin_out + " (final loss " +
               fmt_double(r.final_loss) + ")");
      return kOkExit;
    }

    if (ev->parsed()) {
      Dataset d = load_corpus(ev_corpus);
      Checkpoint ckpt = load_checkpoint(ev_ckpt);
      ModelConfig m = config_from_meta(ckpt.meta);
      const std::vector<Sample>& samples = split_of(d, ev_split);
      Metrics metrics;
      if (ev_task == "classify") {
        metrics = run_protocol(protocol_from_name(ev_protocol), ckpt,
                               to_labeled(samples),
                               prompts_for_split(d, ev_split, m.max_len),
                               ev_window, ev_views, ev_repeats, ev_seed);
      } else if (ev_task == "retrieval") {
        if (ev_captions.empty())
          throw InvalidConfig("eval: retrieval needs --captions");
        std::vector<VideoClip> clips;
        for (const Sample& s : samples) clips.push_back(s.clip);
        std::vector<TextSequence> caps =
            captions_for(d, samples, ev_captions, m.max_len);
        metrics = retrieval_eval(ckpt, clips, caps, {1, 5, 10}, ev_window);
      } else {
        metrics = image_task_eval(ckpt, to_labeled(samples),
                                  image_class_prompts(d.vocab, m.max_len));
      }
      write_metrics_csv(metrics, ev_out);
      write_run_manifest(ev_out + ".manifest.tsv",
                         {{"command", "eval"},
                          {"task", ev_task},
                          {"split", ev_split},
                          {"protocol", ev_protocol},
                          {"seed", std::to_string(ev_seed)},
                          {"ckpt_hash", hash_hex(content_hash(ckpt))},
                          {"corpus_digest", corpus_digest(ev_corpus)},
                          {"output_digest", file_digest_hex(ev_out)}});
      log_line(ev_task + " top1 " + fmt_double(metrics.top1) + " top5 " +
               fmt_double(metrics.top5) + " -> " + ev_out);
      return kOkExit;
    }

    if (sw->parsed()) {
      Dataset d = load_corpus(sw_corpus);
      Checkpoint anchor = load_checkpoint(sw_anchor);
      Checkpoint tuned = load_checkpoint(sw_tuned);
      ModelConfig m = config_from_meta(anchor.meta);
      TradeoffInputs inputs;
      inputs.closeset_items = to_labeled(split_of(d, sw_closeset));
      inputs.closeset_classes = prompts_for_split(d, sw_closeset, m.max_len);
      inputs.zeroshot_items = to_labeled(split_of(d, sw_zeroshot));
      inputs.zeroshot_classes = prompts_for_split(d, sw_zeroshot, m.max_len);
      auto rows = tradeoff_sweep(anchor, tuned, parse_lambda_grid(sw_grid),
                                 inputs, sw_window, sw_views);
      write_sweep_csv(rows, sw_out);
      write_run_manifest(sw_out + ".manifest.tsv",
                         {{"command", "sweep"},
                          {"grid", sw_grid},
                          {"anchor_hash", hash_hex(content_hash(anchor))},
                          {"tuned_hash", hash_hex(content_hash(tuned))},
                          {"corpus_digest", corpus_digest(sw_corpus)},
                          {"output_digest", file_digest_hex(sw_out)}});
      log_line("sweep (" + std::to_string(rows.size()) + " points) -> " + sw_out);
      return kOkExit;
    }

    if (in->parsed()) {
      Checkpoint a = load_checkpoint(in_a);
      Checkpoint b = load_checkpoint(in_b);
      Checkpoint out = final_patch(a, b, in_lambda);
      save_checkpoint(out, in_out);
      write_run_manifest(in_out + ".manifest.tsv",
                         {{"command", "interp"},
                          {"lambda", fmt_double(in_lambda)},
                          {"a_hash", hash_hex(content_hash(a))},
                          {"b_hash", hash_hex(content_hash(b))},
                          {"output_hash", hash_hex(content_hash(out))}});
      log_line("blend written to " + in_out);
      return kOkExit;
    }

    if (insp->parsed()) {
      Checkpoint c = load_checkpoint(insp_path);
      log_line("checkpoint " + insp_path);
      log_line("content hash " + hash_hex(content_hash(c)));
      for (const auto& [k, v] : c.meta) log_line("meta " + k + " = " + v);
      for (const auto& [name, t] : c.params) {
        double mean = mean_f64(t);
        double var = 0.0;
        for (Eigen::Index i = 0; i < t.numel(); ++i) {
          double x = static_cast<double>(t.data[i]) - mean;
          var += x * x / static_cast<double>(t.numel());
        }
        log_line(name + " " + t.shape_str() + " mean " + fmt_double(mean) +
                 " std " + fmt_double(std::sqrt(var)));
      }
      return kOkExit;
    }
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageExit;
  } catch (const InvalidConfig& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageExit;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kNumericExit;
  } catch (const BackendError& e) {
    std::fprintf(stderr, "backend error: %s\n", e.what());
    return kIoExit;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kIoExit;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kOkExit;
}

}  // namespace ovclip
