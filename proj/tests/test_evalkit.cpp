#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "ovclip/evalkit.hpp"
#include "ovclip/io_util.hpp"
#include "ovclip/weightspace.hpp"

using namespace ovclip;

namespace {

// Small architecture + corpus shared by most cases.
struct Fixture {
  ModelConfig mcfg;
  Dataset data;
  Checkpoint ckpt;

  Fixture() {
    CorpusConfig ccfg;
    ccfg.frame_size = 8;
    ccfg.train_per_class = 1;
    ccfg.test_per_class = 2;
    ccfg.heldout_test_per_class = 2;
    ccfg.pretrain_per_shape = 2;
    ccfg.pretrain_test_per_shape = 1;
    data = build_corpus(ccfg, 7);

    mcfg.frame_size = 8;
    mcfg.patch = 4;
    mcfg.dim = 16;
    mcfg.heads = 2;
    mcfg.layers = 1;
    mcfg.embed_dim = 8;
    mcfg.vocab = data.vocab.size();
    mcfg.max_len = 24;
    ckpt = init_dual_encoder(mcfg, 3);
  }
};

const Fixture& fix() {
  static Fixture f;
  return f;
}

// Independent argmax/top-k oracle over a raw score matrix.
void oracle_accuracy(const Tensor<float>& scores, const std::vector<int>& truth,
                     double& top1, double& top5) {
  Eigen::Index n = scores.rows(), m = scores.cols();
  int hits1 = 0, hits5 = 0;
  int k5 = static_cast<int>(std::min<Eigen::Index>(5, m));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return scores.mat()(i, a) > scores.mat()(i, b);
    });
    if (order[0] == truth[i]) ++hits1;
    for (int r = 0; r < k5; ++r)
      if (order[r] == truth[i]) {
        ++hits5;
        break;
      }
  }
  top1 = static_cast<double>(hits1) / n;
  top5 = static_cast<double>(hits5) / n;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("metrics invariants are enforced") {
  Metrics m;
  m.top1 = 0.5;
  m.top5 = 0.8;
  m.t2v_recall = {{1, 0.2}, {5, 0.6}};
  CHECK_NOTHROW(m.validate());
  m.top5 = 0.4;
  CHECK_THROWS_AS(m.validate(), NumericError);
  m.top5 = 0.8;
  m.t2v_recall = {{1, 0.9}, {5, 0.3}};
  CHECK_THROWS_AS(m.validate(), NumericError);
  m.t2v_recall.clear();
  m.top1 = 1.5;
  CHECK_THROWS_AS(m.validate(), NumericError);
}

TEST_CASE("dataset adapters and subset helpers") {
  const Fixture& f = fix();
  LabeledClips items = to_labeled(f.data.seen_test);
  CHECK(items.size() == f.data.seen_test.size());
  CHECK(items.class_ids[0] == f.data.seen_test[0].class_id);

  ClassPrompts seen = label_class_prompts(f.data.classes, f.data.seen_ids,
                                          f.data.vocab, f.mcfg.max_len);
  CHECK(seen.size() == f.data.seen_ids.size());
  for (std::size_t i = 1; i < seen.ids.size(); ++i)
    CHECK(seen.ids[i] > seen.ids[i - 1]);

  std::vector<int> keep = {seen.ids[0], seen.ids[1]};
  LabeledClips narrowed = filter_by_class(items, keep);
  for (int id : narrowed.class_ids)
    CHECK((id == keep[0] || id == keep[1]));
  ClassPrompts sub = subset_prompts(seen, keep);
  CHECK(sub.size() == 2);

  CHECK_THROWS_AS(filter_by_class(items, {999}), InvalidArgument);
  CHECK_THROWS_AS(subset_prompts(seen, {999}), InvalidArgument);
  CHECK_THROWS_AS(label_class_prompts(f.data.classes, {77}, f.data.vocab, 24),
                  InvalidArgument);
  CHECK(image_class_prompts(f.data.vocab, 24).size() == 4);
}

TEST_CASE("rotate_clip cycles frames") {
  const Fixture& f = fix();
  const VideoClip& clip = f.data.train[0].clip;
  CHECK(max_abs_diff(rotate_clip(clip, 0).frames, clip.frames) == 0.0f);
  CHECK(max_abs_diff(rotate_clip(clip, 4).frames, clip.frames) == 0.0f);
  CHECK(max_abs_diff(rotate_clip(clip, -4).frames, clip.frames) == 0.0f);
  VideoClip once = rotate_clip(clip, 1);
  VideoClip back = rotate_clip(once, 3);
  CHECK(max_abs_diff(back.frames, clip.frames) == 0.0f);
  CHECK(max_abs_diff(once.frames, clip.frames) > 0.0f);

  // a static clip is rotation-invariant
  VideoClip still = make_static_video(render_frame(Shape::ring, 0, 1, 0.05f, 8), 4);
  CHECK(max_abs_diff(rotate_clip(still, 2).frames, still.frames) == 0.0f);
}

TEST_CASE("embedding is insensitive to the batch split") {
  const Fixture& f = fix();
  std::vector<VideoClip> clips;
  for (int i = 0; i < 6; ++i) clips.push_back(f.data.seen_test[i].clip);
  Tensor<float> whole = embed_clips(f.ckpt, clips, 3, 64);
  Tensor<float> pieces = embed_clips(f.ckpt, clips, 3, 2);
  CHECK(max_abs_diff(whole, pieces) < 1e-6f);

  std::vector<TextSequence> texts;
  for (int id : f.data.seen_ids)
    texts.push_back(tokenize(f.data.vocab,
                             label_prompt(f.data.class_by_id(id).label), 24));
  Tensor<float> tw = embed_texts(f.ckpt, texts, 64);
  Tensor<float> tp = embed_texts(f.ckpt, texts, 3);
  CHECK(max_abs_diff(tw, tp) < 1e-6f);
}

TEST_CASE("classification equals an independent argmax oracle") {
  const Fixture& f = fix();
  LabeledClips items = to_labeled(f.data.seen_test);
  ClassPrompts classes = label_class_prompts(f.data.classes, f.data.seen_ids,
                                             f.data.vocab, f.mcfg.max_len);
  Metrics m = classify_zero_shot(f.ckpt, items, classes, 3, 1);

  Tensor<float> scores = class_scores(f.ckpt, items.clips, classes.prompts, 3, 1);
  std::vector<int> truth;
  for (int id : items.class_ids) truth.push_back(classes.column_of(id));
  double top1 = 0.0, top5 = 0.0;
  oracle_accuracy(scores, truth, top1, top5);
  CHECK(m.top1 == doctest::Approx(top1).epsilon(1e-12));
  CHECK(m.top5 == doctest::Approx(top5).epsilon(1e-12));
  CHECK(m.top1_std == 0.0);
  m.validate();
}

TEST_CASE("one class forces top-1 accuracy 1") {
  const Fixture& f = fix();
  LabeledClips items = to_labeled(f.data.seen_test);
  int only = items.class_ids[0];
  LabeledClips single = filter_by_class(items, {only});
  ClassPrompts one = label_class_prompts(f.data.classes, {only}, f.data.vocab, 24);
  Metrics m = classify_zero_shot(f.ckpt, single, one, 3, 1);
  CHECK(m.top1 == 1.0);
  CHECK(m.top5 == 1.0);
}

TEST_CASE("static clips make every view identical") {
  const Fixture& f = fix();
  LabeledClips items;
  for (int s = 0; s < 4; ++s) {
    items.clips.push_back(
        make_static_video(render_frame(static_cast<Shape>(s), 0, s, 0.05f, 8), 4));
    items.class_ids.push_back(s * 4);  // shape-linear classes
  }
  std::vector<int> ids = {0, 4, 8, 12};
  ClassPrompts classes = label_class_prompts(f.data.classes, ids, f.data.vocab, 24);
  Metrics one = classify_zero_shot(f.ckpt, items, classes, 3, 1);
  Metrics two = classify_zero_shot(f.ckpt, items, classes, 3, 2);
  Metrics four = classify_zero_shot(f.ckpt, items, classes, 3, 4);
  CHECK(one.top1 == two.top1);
  CHECK(one.top5 == two.top5);
  CHECK(one.top1 == four.top1);
}

TEST_CASE("class identity is carried by prompts, not id values") {
  const Fixture& f = fix();
  LabeledClips items = to_labeled(f.data.seen_test);
  ClassPrompts classes = label_class_prompts(f.data.classes, f.data.seen_ids,
                                             f.data.vocab, f.mcfg.max_len);
  // relabel every class id by +100, preserving order and prompts
  ClassPrompts shifted = classes;
  LabeledClips relabeled = items;
  for (int& id : shifted.ids) id += 100;
  for (int& id : relabeled.class_ids) id += 100;
  Metrics a = classify_zero_shot(f.ckpt, items, classes, 3, 1);
  Metrics b = classify_zero_shot(f.ckpt, relabeled, shifted, 3, 1);
  CHECK(a.top1 == b.top1);
  CHECK(a.top5 == b.top5);
}

TEST_CASE("validation rejects malformed classification inputs") {
  const Fixture& f = fix();
  LabeledClips items = to_labeled(f.data.seen_test);
  ClassPrompts classes = label_class_prompts(f.data.classes, f.data.seen_ids,
                                             f.data.vocab, 24);
  ClassPrompts empty;
  CHECK_THROWS_AS(classify_zero_shot(f.ckpt, items, empty, 3, 1), InvalidArgument);
  CHECK_THROWS_AS(classify_zero_shot(f.ckpt, items, classes, 3, 0), InvalidArgument);
  CHECK_THROWS_AS(classify_zero_shot(f.ckpt, items, classes, 2, 1), InvalidArgument);
  // an item whose class has no prompt
  ClassPrompts missing = subset_prompts(classes, {classes.ids[0]});
  CHECK_THROWS_AS(classify_zero_shot(f.ckpt, items, missing, 3, 1), InvalidArgument);
  LabeledClips none;
  CHECK_THROWS_AS(classify_zero_shot(f.ckpt, none, classes, 3, 1), InvalidArgument);
}

TEST_CASE("EP2 is exactly the full-set classification") {
  const Fixture& f = fix();
  LabeledClips items = to_labeled(f.data.seen_test);
  ClassPrompts classes = label_class_prompts(f.data.classes, f.data.seen_ids,
                                             f.data.vocab, 24);
  Metrics direct = classify_zero_shot(f.ckpt, items, classes, 3, 1);
  Metrics ep2 = run_protocol(Protocol::EP2, f.ckpt, items, classes, 3, 1, 1, 9);
  CHECK(ep2.top1 == direct.top1);
  CHECK(ep2.top5 == direct.top5);
  CHECK(ep2.top1_std == 0.0);
}

TEST_CASE("protocol subsets are seeded and reproducible") {
  std::vector<int> ids = {0, 4, 8, 12};
  auto a = protocol_class_subsets(Protocol::EP1, ids, 10, 5);
  auto b = protocol_class_subsets(Protocol::EP1, ids, 10, 5);
  auto c = protocol_class_subsets(Protocol::EP1, ids, 10, 6);
  REQUIRE(a.size() == 10);
  CHECK(a == b);
  CHECK(a != c);
  for (const auto& s : a) {
    CHECK(s.size() == 2);  // half of four
    CHECK(std::is_sorted(s.begin(), s.end()));
    for (int id : s) CHECK(std::count(ids.begin(), ids.end(), id) == 1);
  }
  auto k = protocol_class_subsets(Protocol::K600Split, ids, 99, 5);
  CHECK(k.size() == 3);  // always three splits

  auto it = protocol_item_subsets(10, 3, 5);
  REQUIRE(it.size() == 3);
  for (const auto& s : it) CHECK(s.size() == 5);
  CHECK(it == protocol_item_subsets(10, 3, 5));

  CHECK_THROWS_AS(protocol_class_subsets(Protocol::EP1, {1}, 10, 5), InvalidArgument);
  CHECK_THROWS_AS(protocol_class_subsets(Protocol::EP2, ids, 10, 5), InvalidArgument);
  CHECK_THROWS_AS(protocol_item_subsets(1, 3, 5), InvalidArgument);
}

TEST_CASE("subset protocols equal composing the pieces by hand") {
  const Fixture& f = fix();
  LabeledClips items = to_labeled(f.data.heldout_test);
  ClassPrompts classes = label_class_prompts(f.data.classes, f.data.heldout_ids,
                                             f.data.vocab, 24);
  const std::uint64_t seed = 21;

  for (Protocol p : {Protocol::EP1, Protocol::K600Split}) {
    int repeats = p == Protocol::EP1 ? 6 : 3;
    Metrics got = run_protocol(p, f.ckpt, items, classes, 3, 1, repeats, seed);
    auto subsets = protocol_class_subsets(p, classes.ids, repeats, seed);
    std::vector<double> t1s, t5s;
    for (const auto& ids : subsets) {
      Metrics m = classify_zero_shot(f.ckpt, filter_by_class(items, ids),
                                     subset_prompts(classes, ids), 3, 1);
      t1s.push_back(m.top1);
      t5s.push_back(m.top5);
    }
    double mean1 = std::accumulate(t1s.begin(), t1s.end(), 0.0) / t1s.size();
    double var1 = 0.0;
    for (double v : t1s) var1 += (v - mean1) * (v - mean1) / t1s.size();
    CHECK(got.top1 == doctest::Approx(mean1).epsilon(1e-9));
    CHECK(got.top1_std == doctest::Approx(std::sqrt(var1)).epsilon(1e-9));
  }

  // EP3: feed the item subsets back through classification by hand
  Metrics ep3 = run_protocol(Protocol::EP3, f.ckpt, items, classes, 3, 1, 3, seed);
  auto rowsets = protocol_item_subsets(static_cast<int>(items.size()), 3, seed);
  std::vector<double> t1s;
  for (const auto& rows : rowsets) {
    LabeledClips sub;
    for (int r : rows) {
      sub.clips.push_back(items.clips[r]);
      sub.class_ids.push_back(items.class_ids[r]);
    }
    t1s.push_back(classify_zero_shot(f.ckpt, sub, classes, 3, 1).top1);
  }
  double mean1 = std::accumulate(t1s.begin(), t1s.end(), 0.0) / t1s.size();
  CHECK(ep3.top1 == doctest::Approx(mean1).epsilon(1e-9));

  CHECK(protocol_from_name("EP1") == Protocol::EP1);
  CHECK(protocol_from_name("K600SPLIT") == Protocol::K600Split);
  CHECK(protocol_name(Protocol::EP3) == "EP3");
  CHECK_THROWS_AS(protocol_from_name("EP9"), InvalidArgument);
}

TEST_CASE("retrieval equals an exhaustive sort-based oracle") {
  const Fixture& f = fix();
  // 32 pairs with pairwise-distinct captions: the k-th clip of a class gets
  // its label plus the k-th grid position, so no two captions coincide
  std::vector<VideoClip> clips;
  std::vector<TextSequence> captions;
  std::vector<Sample> pool;
  for (const Sample& s : f.data.train) pool.push_back(s);
  for (const Sample& s : f.data.seen_test) pool.push_back(s);
  REQUIRE(pool.size() >= 32);
  std::map<int, int> occurrences;
  std::set<std::string> used;
  for (const Sample& s : pool) {
    if (clips.size() == 32) break;
    int k = occurrences[s.class_id]++;
    REQUIRE(k < 4);
    std::string cap = "a video of " + s.label + " at row " +
                      std::to_string(k / 2) + " column " + std::to_string(k % 2);
    REQUIRE(used.insert(cap).second);
    clips.push_back(s.clip);
    captions.push_back(tokenize(f.data.vocab, cap, 24));
  }
  REQUIRE(clips.size() == 32);

  std::vector<int> Ks = {1, 5, 10};
  Metrics m = retrieval_eval(f.ckpt, clips, captions, Ks, 3);
  m.validate();

  // oracle: full similarity matrix + sorting with index tie-break
  Tensor<float> vemb = embed_clips(f.ckpt, clips, 3);
  Tensor<float> temb = embed_texts(f.ckpt, captions);
  int n = 32;
  auto recall = [&](bool t2v, int K) {
    int hits = 0;
    for (int q = 0; q < n; ++q) {
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        float sa = t2v ? vemb.mat().row(a).dot(temb.mat().row(q))
                       : vemb.mat().row(q).dot(temb.mat().row(a));
        float sb = t2v ? vemb.mat().row(b).dot(temb.mat().row(q))
                       : vemb.mat().row(q).dot(temb.mat().row(b));
        return sa > sb;
      });
      for (int r = 0; r < K; ++r)
        if (order[r] == q) {
          ++hits;
          break;
        }
    }
    return static_cast<double>(hits) / n;
  };
  for (int K : Ks) {
    CHECK(m.t2v_recall[K] == doctest::Approx(recall(true, K)).epsilon(1e-12));
    CHECK(m.v2t_recall[K] == doctest::Approx(recall(false, K)).epsilon(1e-12));
  }

  // recall monotone in K, and K = n is a guaranteed hit
  Metrics full = retrieval_eval(f.ckpt, clips, captions, {1, 5, 10, 32}, 3);
  CHECK(full.t2v_recall[32] == 1.0);
  CHECK(full.v2t_recall[32] == 1.0);
  CHECK(full.t2v_recall[1] <= full.t2v_recall[5]);
  CHECK(full.t2v_recall[5] <= full.t2v_recall[10]);
}

TEST_CASE("retrieval validates its inputs") {
  const Fixture& f = fix();
  std::vector<VideoClip> clips = {f.data.train[0].clip, f.data.train[1].clip};
  TextSequence a = tokenize(f.data.vocab, "a video of square linear", 24);
  TextSequence b = tokenize(f.data.vocab, "a video of square zigzag", 24);
  CHECK_THROWS_AS(retrieval_eval(f.ckpt, clips, {a, a}, {1}, 3), InvalidArgument);
  CHECK_THROWS_AS(retrieval_eval(f.ckpt, clips, {a, b}, {3}, 3), InvalidArgument);
  CHECK_THROWS_AS(retrieval_eval(f.ckpt, clips, {a, b}, {0}, 3), InvalidArgument);
  CHECK_THROWS_AS(retrieval_eval(f.ckpt, clips, {a, b}, {}, 3), InvalidArgument);
  CHECK_THROWS_AS(retrieval_eval(f.ckpt, clips, {a}, {1}, 3), InvalidArgument);
}

TEST_CASE("sweep endpoints reproduce the unpatched checkpoints") {
  const Fixture& f = fix();
  Checkpoint tuned = init_dual_encoder(f.mcfg, 4);  // a different model
  TradeoffInputs in;
  in.closeset_items = to_labeled(f.data.seen_test);
  in.closeset_classes = label_class_prompts(f.data.classes, f.data.seen_ids,
                                            f.data.vocab, 24);
  in.zeroshot_items = to_labeled(f.data.heldout_test);
  in.zeroshot_classes = label_class_prompts(f.data.classes, f.data.heldout_ids,
                                            f.data.vocab, 24);

  auto rows = tradeoff_sweep(f.ckpt, tuned, {0.0, 0.5, 1.0}, in, 3, 1);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].lam == 0.0);
  CHECK(rows[2].lam == 1.0);

  Metrics tuned_close =
      classify_zero_shot(tuned, in.closeset_items, in.closeset_classes, 3, 1);
  Metrics anchor_zero =
      classify_zero_shot(f.ckpt, in.zeroshot_items, in.zeroshot_classes, 3, 1);
  CHECK(rows[0].closeset_top1 == tuned_close.top1);
  CHECK(rows[2].zeroshot_top1 == anchor_zero.top1);

  CHECK_THROWS_AS(tradeoff_sweep(f.ckpt, tuned, {}, in, 3, 1), InvalidArgument);
  CHECK_THROWS_AS(tradeoff_sweep(f.ckpt, tuned, {1.5}, in, 3, 1), InvalidArgument);
}

TEST_CASE("image probe matches single-frame classification at any window") {
  const Fixture& f = fix();
  LabeledClips images = to_labeled(f.data.pretrain_test);
  ClassPrompts classes = image_class_prompts(f.data.vocab, 24);
  Metrics probe = image_task_eval(f.ckpt, images, classes);
  Metrics w1 = classify_zero_shot(f.ckpt, images, classes, 1, 1);
  Metrics w3 = classify_zero_shot(f.ckpt, images, classes, 3, 1);
  CHECK(probe.top1 == w1.top1);
  CHECK(probe.top5 == w1.top5);
  CHECK(w1.top1 == w3.top1);  // one frame has no neighbors to attend to

  LabeledClips videos = to_labeled(f.data.seen_test);
  CHECK_THROWS_AS(image_task_eval(f.ckpt, videos, classes), InvalidArgument);
}

TEST_CASE("csv writers emit fixed-format rows") {
  auto sweep_path = temp_path("ovclip_sweep_test.csv");
  std::vector<SweepRow> rows = {{0.0, 0.5, 0.25}, {0.5, 0.75, 0.125}};
  write_sweep_csv(rows, sweep_path.string());
  CHECK(read_file_text(sweep_path.string()) ==
        "lambda,closeset_top1,zeroshot_top1\n"
        "0.000000,0.500000,0.250000\n"
        "0.500000,0.750000,0.125000\n");

  auto metrics_path = temp_path("ovclip_metrics_test.csv");
  Metrics m;
  m.top1 = 1.0 / 3.0;
  m.top5 = 2.0 / 3.0;
  m.top1_std = 0.1;
  m.t2v_recall = {{1, 0.5}};
  m.v2t_recall = {{1, 0.25}};
  write_metrics_csv(m, metrics_path.string());
  CHECK(read_file_text(metrics_path.string()) ==
        "metric,mean,std\n"
        "top1,0.333333,0.100000\n"
        "top5,0.666667,0.000000\n"
        "t2v_recall@1,0.500000,0.000000\n"
        "v2t_recall@1,0.250000,0.000000\n");
  std::filesystem::remove(sweep_path);
  std::filesystem::remove(metrics_path);
}
