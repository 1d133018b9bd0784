#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>

#include "ovclip/io_util.hpp"
#include "ovclip/pipeline.hpp"

using namespace ovclip;

namespace {

std::string temp_dir(const char* tag) {
  std::string d = std::filesystem::temp_directory_path() /
                  (std::string("ovclip-pipe-") + tag + "-" +
                   std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

CorpusConfig tiny_cfg() {
  CorpusConfig c;
  c.frame_size = 8;
  c.pretrain_per_shape = 3;
  c.pretrain_test_per_shape = 1;
  c.train_per_class = 2;
  c.test_per_class = 1;
  c.heldout_test_per_class = 1;
  return c;
}

ModelConfig tiny_model(const Dataset& d) {
  ModelConfig m;
  m.frame_size = d.cfg.frame_size;
  m.patch = 4;
  m.dim = 8;
  m.heads = 2;
  m.layers = 1;
  m.embed_dim = 4;
  m.vocab = static_cast<int>(d.vocab.size());
  m.max_len = 16;
  return m;
}

}  // namespace

TEST_CASE("corpus round-trips through a directory") {
  Dataset d = build_corpus(tiny_cfg(), 17);
  std::string dir = temp_dir("roundtrip");
  save_corpus(d, dir);
  Dataset back = load_corpus(dir);

  CHECK(back.seed == d.seed);
  CHECK(back.seen_ids == d.seen_ids);
  CHECK(back.heldout_ids == d.heldout_ids);
  CHECK(back.vocab.words == d.vocab.words);
  CHECK(back.classes.size() == d.classes.size());

  auto check_split = [](const std::vector<Sample>& a,
                        const std::vector<Sample>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].class_id == b[i].class_id);
      CHECK(a[i].label == b[i].label);
      CHECK(a[i].caption == b[i].caption);
      CHECK(a[i].clip.frames.shape == b[i].clip.frames.shape);
      CHECK((a[i].clip.frames.data - b[i].clip.frames.data).cwiseAbs().maxCoeff() == 0.0f);
      REQUIRE(a[i].meta.size() == b[i].meta.size());
      for (std::size_t t = 0; t < a[i].meta.size(); ++t) {
        CHECK(a[i].meta[t].shape == b[i].meta[t].shape);
        CHECK(a[i].meta[t].row == b[i].meta[t].row);
        CHECK(a[i].meta[t].col == b[i].meta[t].col);
      }
    }
  };
  check_split(d.pretrain_train, back.pretrain_train);
  check_split(d.pretrain_test, back.pretrain_test);
  check_split(d.train, back.train);
  check_split(d.seen_test, back.seen_test);
  check_split(d.heldout_test, back.heldout_test);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corpus digest is stable across identical dumps and differs across seeds") {
  std::string d1 = temp_dir("dig1"), d2 = temp_dir("dig2"), d3 = temp_dir("dig3");
  save_corpus(build_corpus(tiny_cfg(), 5), d1);
  save_corpus(build_corpus(tiny_cfg(), 5), d2);
  save_corpus(build_corpus(tiny_cfg(), 6), d3);
  CHECK(corpus_digest(d1) == corpus_digest(d2));
  CHECK(corpus_digest(d1) != corpus_digest(d3));
  for (auto& d : {d1, d2, d3}) std::filesystem::remove_all(d);
}

TEST_CASE("loading a tampered corpus fails") {
  Dataset d = build_corpus(tiny_cfg(), 8);
  std::string dir = temp_dir("tamper");
  save_corpus(d, dir);
  // drop a split file entirely
  std::filesystem::remove(dir + "/splits/train.ovck");
  CHECK_THROWS_AS(load_corpus(dir), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pretrain rejects configs that do not describe pretraining") {
  Dataset d = build_corpus(tiny_cfg(), 3);
  ModelConfig m = tiny_model(d);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.freeze_text = false;
  cfg.window = 1;

  TrainConfig frozen = cfg;
  frozen.freeze_text = true;
  CHECK_THROWS_AS(pretrain_phase(m, d, frozen), InvalidConfig);

  TrainConfig with_iwr = cfg;
  with_iwr.iwr_R = 0.5;
  with_iwr.iwr_C = 0.5;
  CHECK_THROWS_AS(pretrain_phase(m, d, with_iwr), InvalidConfig);

  TrainConfig with_swa = cfg;
  with_swa.swa = true;
  CHECK_THROWS_AS(pretrain_phase(m, d, with_swa), InvalidConfig);

  TrainConfig with_gamma = cfg;
  with_gamma.gamma = 1.0;
  CHECK_THROWS_AS(pretrain_phase(m, d, with_gamma), InvalidConfig);

  ModelConfig bad_vocab = m;
  bad_vocab.vocab = m.vocab + 1;
  CHECK_THROWS_AS(pretrain_phase(bad_vocab, d, cfg), InvalidConfig);
}

TEST_CASE("caption-weighted fine-tuning demands a caption for every sample") {
  Dataset d = build_corpus(tiny_cfg(), 4);
  ModelConfig m = tiny_model(d);
  Checkpoint anchor = init_dual_encoder(m, 1);

  std::map<std::string, std::string> captions;  // empty on purpose
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.gamma = 4.0;
  CHECK_THROWS_WITH_AS(finetune_phase(m, d, captions, anchor, cfg),
                       doctest::Contains("caption"), InvalidArgument);

  // the batch-level provider reports the offending sample by id
  BatchGradFn fn = finetune_grad_fn(m, d, captions, 3);
  CHECK_THROWS_WITH_AS(fn(anchor, {0}, 1.0, 4.0),
                       doctest::Contains(d.train[0].id.c_str()), InvalidArgument);

  // with the caption weight off the same provider runs fine
  LossGrad<float> g = fn(anchor, {0, 1}, 1.0, 0.0);
  CHECK(std::isfinite(g.loss));
}

TEST_CASE("run manifests are sorted key/value rows and reject control characters") {
  std::string dir = temp_dir("manifest");
  std::string path = dir + "/run.tsv";
  write_run_manifest(path, {{"b", "2"}, {"a", "1"}});
  CHECK(read_file_text(path) == "a\t1\nb\t2\n");
  CHECK_THROWS_AS(write_run_manifest(path, {{"k", "with\ttab"}}), InvalidArgument);
  CHECK_THROWS_AS(write_run_manifest(path, {{"k", "with\nnewline"}}), InvalidArgument);
  std::filesystem::remove_all(dir);
}
