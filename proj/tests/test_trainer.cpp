#include <doctest.h>

#include <filesystem>
#include <random>

#include "crop/adam.hpp"
#include "crop/losses.hpp"
#include "crop/synthetic.hpp"
#include "crop/trainer.hpp"

using namespace crop;
namespace fs = std::filesystem;

namespace {

std::vector<AnnotatedSample> tiny_scenes(int count, int side, uint64_t seed) {
  SceneSpec spec = scene_preset_basic(side);
  spec.distractor_count = 0;
  spec.clutter = 0.1;
  return generate_scene_dataset(spec, count, seed);
}

TrainConfig quick_config(int epochs, uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 4;
  cfg.max_epochs = epochs;
  cfg.eval_every = 1;
  cfg.augment_enabled = false;
  cfg.seed = seed;
  return cfg;
}

/// Returns the ground-truth mask as probabilities, optionally degraded to a
/// fixed IoU by keeping only a prefix of the foreground.
class StubSegmenter final : public Segmenter {
 public:
  StubSegmenter(int side, double keep_fraction = 1.0) : side_(side), keep_(keep_fraction) {}
  int input_side() const override { return side_; }
  ProbMap predict(const RasterImage& image) const override {
    // foreground = pixels brighter than 0.5 in the red channel
    ProbMap p(image.width, image.height);
    size_t total = 0;
    for (size_t i = 0; i < p.data.size(); ++i) total += image.data[i] > 0.5f;
    size_t budget = static_cast<size_t>(keep_ * total);
    for (size_t i = 0; i < p.data.size(); ++i) {
      if (image.data[i] > 0.5f && budget > 0) {
        p.data[i] = 1.f;
        --budget;
      }
    }
    return p;
  }

 private:
  int side_;
  double keep_;
};

AnnotatedSample mask_sample(int side, int fg_pixels) {
  AnnotatedSample s;
  s.image = RasterImage(side, side, 0.f);
  s.mask = BinaryMask(side, side);
  for (int i = 0; i < fg_pixels; ++i) {
    const int y = i / side, x = i % side;
    s.mask.at(y, x) = 1;
    s.image.at(0, y, x) = 1.f;  // stub reads the red channel
  }
  return s;
}

}  // namespace

TEST_CASE("train rejects bad configurations and empty data") {
  NetworkConfig nc{.depth = 1, .base_width = 2, .input_side = 16};
  Network net(nc, 1);
  auto data = tiny_scenes(4, 16, 3);
  TrainConfig cfg = quick_config(0);
  CHECK_THROWS(train(net, data, {}, cfg));  // max_epochs = 0
  cfg.max_epochs = 1;
  CHECK_THROWS(train(net, {}, {}, cfg));  // empty training set
  cfg.learning_rate = 0;
  CHECK_THROWS(train(net, data, {}, cfg));
}

TEST_CASE("one epoch yields exactly one record; eval cadence controls the rest") {
  NetworkConfig nc{.depth = 1, .base_width = 2, .input_side = 16};
  auto data = tiny_scenes(6, 16, 4);
  std::vector<AnnotatedSample> tr(data.begin(), data.begin() + 4);
  std::vector<AnnotatedSample> va(data.begin() + 4, data.end());

  Network net(nc, 1);
  TrainResult one = train(net, tr, va, quick_config(1));
  CHECK(one.records.size() == 1);
  CHECK(one.records[0].epoch == 1);

  Network net2(nc, 1);
  TrainConfig cfg = quick_config(7);
  cfg.eval_every = 3;
  TrainResult res = train(net2, tr, va, cfg);
  // epochs 3 and 6 on cadence, plus the forced final epoch 7
  REQUIRE(res.records.size() == 3);
  CHECK(res.records[0].epoch == 3);
  CHECK(res.records[1].epoch == 6);
  CHECK(res.records[2].epoch == 7);
  for (const auto& r : res.records) {
    CHECK(std::isfinite(r.train_loss));
    CHECK(std::isfinite(r.val_loss));
    CHECK(r.train_iou >= 0);
    CHECK(r.train_iou <= 1);
    CHECK(r.val_iou >= 0);
    CHECK(r.val_iou <= 1);
  }
}

TEST_CASE("a single Adam step at small learning rate decreases the loss") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> d(0.f, 1.f);
  int decreased = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    NetworkConfig nc{.depth = 2, .base_width = 2, .input_side = 16};
    Network net(nc, 100 + trial);
    Tensor x(3, 3, 16, 16);
    for (auto& v : x.v) v = d(rng);
    std::vector<float> t(3 * 256);
    for (auto& v : t) v = d(rng) > 0.5f ? 1.f : 0.f;

    auto loss_of = [&net, &x, &t]() {
      Workspace ws;
      Tensor logits = net.forward_train(x, ws);
      sigmoid_inplace(logits);
      double total = 0;
      for (int i = 0; i < 3; ++i)
        total += soft_dice_loss(std::span<const float>(logits.item(i), logits.plane()),
                                std::span<const float>(t.data() + i * logits.plane(),
                                                       logits.plane()));
      return total / 3;
    };
    const double before = loss_of();

    Workspace ws;
    Tensor logits = net.forward_train(x, ws);
    Tensor probs = logits;
    sigmoid_inplace(probs);
    Tensor gl(3, 1, 16, 16);
    for (int i = 0; i < 3; ++i) {
      auto g = soft_dice_grad(std::span<const float>(probs.item(i), probs.plane()),
                              std::span<const float>(t.data() + i * probs.plane(), probs.plane()));
      for (size_t j = 0; j < g.size(); ++j)
        gl.item(i)[j] = float(g[j] / 3) * probs.item(i)[j] * (1 - probs.item(i)[j]);
    }
    GradStore grads = net.make_grad_store();
    net.backward(gl, ws, grads);
    Adam adam(net, 1e-4);
    adam.step(grads);

    if (loss_of() < before) ++decreased;
  }
  CHECK(decreased >= trials * 95 / 100);
}

TEST_CASE("best checkpoint maximizes the recorded validation IoU and reloads exactly") {
  const fs::path dir = fs::temp_directory_path() / "crop_train_best";
  fs::remove_all(dir);
  auto data = tiny_scenes(10, 16, 6);
  std::vector<AnnotatedSample> tr(data.begin(), data.begin() + 8);
  std::vector<AnnotatedSample> va(data.begin() + 8, data.end());

  NetworkConfig nc{.depth = 2, .base_width = 4, .input_side = 16};
  Network net(nc, 7);
  TrainConfig cfg = quick_config(6, 11);
  cfg.out_dir = dir.string();
  cfg.tag = "ut";
  cfg.emit_plots = false;
  TrainResult res = train(net, tr, va, cfg);

  double max_iou = -1;
  for (const auto& r : res.records) max_iou = std::max(max_iou, r.val_iou);
  CHECK(res.best_val_iou == max_iou);

  // the duplicated epoch-named dictionary reloads to the recorded IoU
  const std::string path = (dir / checkpoint_name("ut", res.best_epoch)).string();
  CheckpointMeta meta;
  Network best = load_checkpoint(path, &meta);
  CHECK(meta.epoch == res.best_epoch);
  EvalResult ev = evaluate(best, va);
  CHECK(ev.mean_iou == doctest::Approx(res.best_val_iou).epsilon(1e-6));

  // curves CSV has one row per evaluation epoch
  auto rows = read_curves_csv((dir / "curves.csv").string());
  REQUIRE(rows.size() == res.records.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].epoch == res.records[i].epoch);
    CHECK(rows[i].val_iou == res.records[i].val_iou);
  }
}

TEST_CASE("training is deterministic with augmentation off and a fixed seed") {
  auto data = tiny_scenes(8, 16, 8);
  std::vector<AnnotatedSample> tr(data.begin(), data.begin() + 6);
  std::vector<AnnotatedSample> va(data.begin() + 6, data.end());
  NetworkConfig nc{.depth = 1, .base_width = 2, .input_side = 16};

  auto run = [&]() {
    Network net(nc, 5);
    return train(net, tr, va, quick_config(4, 17));
  };
  TrainResult a = run(), b = run();
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].train_loss == b.records[i].train_loss);
    CHECK(a.records[i].val_loss == b.records[i].val_loss);
    CHECK(a.records[i].train_iou == b.records[i].train_iou);
    CHECK(a.records[i].val_iou == b.records[i].val_iou);
  }
}

TEST_CASE("non-finite losses abort with the offending epoch and batch") {
  auto data = tiny_scenes(4, 16, 9);
  NetworkConfig nc{.depth = 1, .base_width = 2, .input_side = 16};
  Network net(nc, 3);
  bool first = true;
  net.for_each_param([&first](std::vector<float>& p) {
    if (first && !p.empty()) {
      p[0] = std::numeric_limits<float>::infinity();
      first = false;
    }
  });
  try {
    train(net, data, {}, quick_config(2));
    FAIL("expected TrainingDivergence");
  } catch (const TrainingDivergence& e) {
    CHECK(e.epoch == 1);
    CHECK(e.batch == 0);
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("fine_tune continues from the checkpoint and validates shapes") {
  auto data = tiny_scenes(6, 16, 10);
  NetworkConfig nc{.depth = 1, .base_width = 2, .input_side = 16};
  Network net(nc, 2);
  TrainResult base = train(net, data, {}, quick_config(2));

  TrainConfig ft = quick_config(1);
  ft.learning_rate = 1e-4;
  TrainResult cont = fine_tune(base.best, data, {}, ft);
  CHECK(cont.records.size() == 1);

  auto wrong = tiny_scenes(2, 32, 11);  // 32 != 16
  CHECK_THROWS(fine_tune(base.best, wrong, {}, ft));
}

TEST_CASE("evaluate reports stub identities and fixed mean IoUs") {
  // oracle stub: prediction == ground truth everywhere
  std::vector<AnnotatedSample> ds;
  ds.push_back(mask_sample(16, 10));
  ds.push_back(mask_sample(16, 30));
  StubSegmenter oracle(16);
  EvalResult perfect = evaluate(oracle, ds);
  CHECK(perfect.mean_iou == 1.0);

  // stubs with per-sample IoUs 0.4 and 0.8 via prefix truncation
  std::vector<AnnotatedSample> two;
  two.push_back(mask_sample(16, 10));
  two.push_back(mask_sample(16, 10));
  StubSegmenter keep4(16, 0.4);  // 4 of 10 foreground pixels -> IoU 0.4
  EvalResult first = evaluate(keep4, {two[0]});
  CHECK(first.mean_iou == doctest::Approx(0.4).epsilon(1e-12));
  StubSegmenter keep8(16, 0.8);
  EvalResult second = evaluate(keep8, {two[1]});
  CHECK(second.mean_iou == doctest::Approx(0.8).epsilon(1e-12));
  CHECK((first.mean_iou + second.mean_iou) / 2 == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("evaluate is invariant to dataset ordering") {
  auto data = tiny_scenes(6, 16, 12);
  NetworkConfig nc{.depth = 1, .base_width = 2, .input_side = 16};
  Network net(nc, 13);
  EvalResult fwd = evaluate(net, data);
  std::reverse(data.begin(), data.end());
  EvalResult rev = evaluate(net, data);
  CHECK(fwd.mean_iou == doctest::Approx(rev.mean_iou).epsilon(1e-12));
}

TEST_CASE("depth ablation trains both variants and fills the table") {
  auto scenes = tiny_scenes(10, 16, 14);
  NetworkConfig deep{.depth = 2, .base_width = 2, .input_side = 16};
  NetworkConfig shallow{.depth = 1, .base_width = 2, .input_side = 16};
  TrainConfig base = quick_config(2);
  const uint64_t seeds[] = {1, 2};
  const fs::path dir = fs::temp_directory_path() / "crop_ablation_ut";
  fs::remove_all(dir);
  AblationResult res = run_depth_ablation(scenes, deep, shallow, base, seeds, dir.string());
  REQUIRE(res.rows.size() == 2);
  for (const auto& row : res.rows) {
    CHECK(row.deep_best_iou >= 0);
    CHECK(row.deep_best_iou <= 1);
    CHECK(row.shallow_best_iou >= 0);
    CHECK(row.shallow_best_iou <= 1);
  }
  CHECK(fs::exists(dir / "ablation.csv"));
}

TEST_CASE("target_val_iou stops training at the first satisfying evaluation") {
  auto data = tiny_scenes(8, 16, 15);
  std::vector<AnnotatedSample> tr(data.begin(), data.begin() + 6);
  std::vector<AnnotatedSample> va(data.begin() + 6, data.end());
  NetworkConfig nc{.depth = 1, .base_width = 2, .input_side = 16};
  Network net(nc, 4);
  TrainConfig cfg = quick_config(50);
  cfg.target_val_iou = 1e-6;  // any evaluation satisfies it
  TrainResult res = train(net, tr, va, cfg);
  CHECK(res.records.size() == 1);
}
