#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>

#include "ovclip/io_util.hpp"

// OVCLIP_BIN is injected by the build with the path of the command-line tool.

using namespace ovclip;

namespace {

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr interleaved
};

RunResult run(const std::string& args) {
  std::string cmd = std::string(OVCLIP_BIN) + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  RunResult r;
  char buf[1024];
  std::size_t got;
  while ((got = ::fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, got);
  int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct Workdir {
  std::string path;
  Workdir() {
    path = std::filesystem::temp_directory_path() /
           ("ovclip-cli-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~Workdir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return path + "/" + leaf; }
};

// One shared tiny pipeline; building it once keeps the suite fast.
struct Pipeline {
  Workdir dir;
  std::string corpus, anchor, caps, tuned, sweep_csv;
  Pipeline() {
    corpus = dir / "corpus";
    anchor = dir / "pre.ovck";
    caps = dir / "caps.tsv";
    tuned = dir / "ft.ovck";
    sweep_csv = dir / "sweep.csv";
    REQUIRE(run("gen-corpus --out " + corpus +
                " --seed 5 --frame-size 8 --train-per-class 2 --test-per-class 1"
                " --heldout-test-per-class 1 --pretrain-per-shape 3"
                " --pretrain-test-per-shape 1")
                .code == 0);
    REQUIRE(run("pretrain --corpus " + corpus + " --out " + anchor +
                " --epochs 3 --warmup-epochs 1 --dim 8 --layers 1 --embed-dim 4"
                " --max-len 16")
                .code == 0);
    REQUIRE(run("caption --corpus " + corpus + " --out " + caps).code == 0);
    REQUIRE(run("finetune --corpus " + corpus + " --anchor " + anchor + " --out " +
                tuned + " --captions " + caps +
                " --epochs 3 --warmup-epochs 1 --iwr-R 0.5 --iwr-C 0.5 --gamma 4")
                .code == 0);
    REQUIRE(run("sweep --corpus " + corpus + " --anchor " + anchor + " --tuned " +
                tuned + " --out " + sweep_csv + " --lambda-grid 0:1:0.5")
                .code == 0);
  }
};

Pipeline& pipe() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("unknown flags and missing subcommands exit 2 with usage help") {
  RunResult r = run("--bogus-flag");
  CHECK(r.code == 2);
  r = run("");
  CHECK(r.code == 2);
  r = run("gen-corpus");  // missing required --out
  CHECK(r.code == 2);
  r = run("finetune --corpus nowhere --anchor nowhere --out x --window 2");
  CHECK(r.code == 2);  // even windows are rejected before any I/O
  CHECK(r.output.find("window") != std::string::npos);
}

TEST_CASE("help is printed on request") {
  RunResult r = run("--help");
  CHECK(r.code == 0);
  CHECK(r.output.find("gen-corpus") != std::string::npos);
  RunResult s = run("sweep --help");
  CHECK(s.code == 0);
  CHECK(s.output.find("--lambda-grid") != std::string::npos);
}

TEST_CASE("missing inputs exit 4") {
  RunResult r = run("pretrain --corpus /nonexistent-corpus --out /tmp/x.ovck");
  CHECK(r.code == 4);
  RunResult s = run("inspect-ckpt /nonexistent.ovck");
  CHECK(s.code == 4);
}

TEST_CASE("the tiny pipeline produces artifacts with manifests") {
  Pipeline& p = pipe();
  CHECK(file_exists(p.corpus + "/manifest.tsv"));
  CHECK(file_exists(p.corpus + "/run_manifest.tsv"));
  CHECK(file_exists(p.anchor));
  CHECK(file_exists(p.anchor + ".manifest.tsv"));
  CHECK(file_exists(p.caps));
  CHECK(file_exists(p.tuned));
  CHECK(file_exists(p.sweep_csv));
  std::string manifest = read_file_text(p.tuned + ".manifest.tsv");
  CHECK(manifest.find("command\tfinetune") != std::string::npos);
  CHECK(manifest.find("corpus_digest\t") != std::string::npos);
  std::string csv = read_file_text(p.sweep_csv);
  CHECK(csv.rfind("lambda,closeset_top1,zeroshot_top1\n", 0) == 0);
}

TEST_CASE("reruns with the same seed and config are byte-identical") {
  Pipeline& p = pipe();
  std::string corpus2 = p.dir / "corpus2";
  REQUIRE(run("gen-corpus --out " + corpus2 +
              " --seed 5 --frame-size 8 --train-per-class 2 --test-per-class 1"
              " --heldout-test-per-class 1 --pretrain-per-shape 3"
              " --pretrain-test-per-shape 1")
              .code == 0);
  CHECK(read_file_text(corpus2 + "/manifest.tsv") ==
        read_file_text(p.corpus + "/manifest.tsv"));

  std::string sweep2 = p.dir / "sweep2.csv";
  REQUIRE(run("sweep --corpus " + p.corpus + " --anchor " + p.anchor +
              " --tuned " + p.tuned + " --out " + sweep2 +
              " --lambda-grid 0:1:0.5")
              .code == 0);
  CHECK(read_file_text(sweep2) == read_file_text(p.sweep_csv));
}

TEST_CASE("lambda grids accept ranges and comma lists") {
  Pipeline& p = pipe();
  std::string a = p.dir / "grid-a.csv";
  std::string b = p.dir / "grid-b.csv";
  REQUIRE(run("sweep --corpus " + p.corpus + " --anchor " + p.anchor +
              " --tuned " + p.tuned + " --out " + a + " --lambda-grid 0,0.5,1")
              .code == 0);
  REQUIRE(run("sweep --corpus " + p.corpus + " --anchor " + p.anchor +
              " --tuned " + p.tuned + " --out " + b + " --lambda-grid 0:1:0.5")
              .code == 0);
  CHECK(read_file_text(a) == read_file_text(b));
  // 0:1:0.1 must yield exactly 11 rows (header + 11 lines)
  std::string c = p.dir / "grid-c.csv";
  REQUIRE(run("sweep --corpus " + p.corpus + " --anchor " + p.anchor +
              " --tuned " + p.tuned + " --out " + c + " --lambda-grid 0:1:0.1")
              .code == 0);
  std::string text = read_file_text(c);
  CHECK(std::count(text.begin(), text.end(), '\n') == 12);
  CHECK(run("sweep --corpus " + p.corpus + " --anchor " + p.anchor + " --tuned " +
            p.tuned + " --out " + c + " --lambda-grid 0:2:0.5")
            .code == 2);
  CHECK(run("sweep --corpus " + p.corpus + " --anchor " + p.anchor + " --tuned " +
            p.tuned + " --out " + c + " --lambda-grid nonsense")
            .code == 2);
}

TEST_CASE("eval writes metric rows for all three tasks") {
  Pipeline& p = pipe();
  std::string m1 = p.dir / "cls.csv";
  REQUIRE(run("eval --corpus " + p.corpus + " --ckpt " + p.tuned + " --out " + m1 +
              " --task classify --protocol EP1 --repeats 3 --split heldout-test")
              .code == 0);
  CHECK(read_file_text(m1).rfind("metric,mean,std\n", 0) == 0);

  std::string m2 = p.dir / "img.csv";
  REQUIRE(run("eval --corpus " + p.corpus + " --ckpt " + p.anchor + " --out " + m2 +
              " --task image --split pretrain-test")
              .code == 0);
  CHECK(read_file_text(m2).find("top1,") != std::string::npos);

  // retrieval wants captions and per-pair distinct ones; the per-class stub
  // captions collide, which must surface as a usage error
  std::string m3 = p.dir / "ret.csv";
  CHECK(run("eval --corpus " + p.corpus + " --ckpt " + p.tuned + " --out " + m3 +
            " --task retrieval --split train --captions " + p.caps)
            .code == 2);
  CHECK(run("eval --corpus " + p.corpus + " --ckpt " + p.tuned + " --out " + m3 +
            " --task retrieval --split train")
            .code == 2);
}

TEST_CASE("interp blends endpoints and inspect prints tensor stats") {
  Pipeline& p = pipe();
  std::string mid = p.dir / "mid.ovck";
  REQUIRE(run("interp " + p.anchor + " " + p.tuned + " --lambda 1 -o " + mid).code == 0);
  RunResult ia = run("inspect-ckpt " + p.anchor);
  RunResult im = run("inspect-ckpt " + mid);
  CHECK(ia.code == 0);
  CHECK(im.code == 0);
  // lambda 1 reproduces the anchor tensor-for-tensor
  CHECK(im.output.find("vision.proj") != std::string::npos);
  std::string astats = ia.output.substr(ia.output.find("vision."));
  std::string mstats = im.output.substr(im.output.find("vision."));
  CHECK(astats == mstats);
  CHECK(run("interp " + p.anchor + " " + p.tuned + " --lambda 1.5 -o " + mid).code == 2);
}

TEST_CASE("config files feed defaults and flags override them") {
  Pipeline& p = pipe();
  std::string cfg = p.dir / "sweep.cfg";
  write_file_atomic(cfg, std::string("lambda-grid = \"0:1:0.5\"\n"));
  std::string out1 = p.dir / "cfg1.csv";
  REQUIRE(run("sweep --config " + cfg + " --corpus " + p.corpus + " --anchor " +
              p.anchor + " --tuned " + p.tuned + " --out " + out1)
              .code == 0);
  CHECK(read_file_text(out1) == read_file_text(p.sweep_csv));

  // a flag beats the file: grid from the command line wins
  std::string out2 = p.dir / "cfg2.csv";
  REQUIRE(run("sweep --config " + cfg + " --corpus " + p.corpus + " --anchor " +
              p.anchor + " --tuned " + p.tuned + " --out " + out2 +
              " --lambda-grid 0,1")
              .code == 0);
  CHECK(std::count(read_file_text(out2).begin(), read_file_text(out2).end(), '\n') == 3);

  // unknown keys in the file are rejected
  std::string bad = p.dir / "bad.cfg";
  write_file_atomic(bad, std::string("no-such-knob = 3\n"));
  CHECK(run("sweep --config " + bad + " --corpus " + p.corpus + " --anchor " +
            p.anchor + " --tuned " + p.tuned + " --out " + out2)
            .code == 2);
}

TEST_CASE("divergent training exits 3") {
  Pipeline& p = pipe();
  RunResult r = run("finetune --corpus " + p.corpus + " --anchor " + p.anchor +
                    " --out " + (p.dir / "blowup.ovck") +
                    " --epochs 2 --warmup-epochs 0 --lr-peak 1e8 --lr-floor 1e8");
  CHECK(r.code == 3);
  CHECK(r.output.find("numeric error") != std::string::npos);
}
