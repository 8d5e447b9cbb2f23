#include "crop/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "crop/adam.hpp"
#include "crop/csvio.hpp"
#include "crop/losses.hpp"
#include "crop/plot.hpp"

namespace crop {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw std::invalid_argument("train: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("train: eval_every must be >= 1");
  if (binarize_threshold <= 0 || binarize_threshold >= 1)
    throw std::invalid_argument("train: binarize_threshold must be in (0,1)");
  if (augment_enabled) augmentation.validate();
}

namespace {

void check_sample_shapes(const std::vector<AnnotatedSample>& set, int side, const char* which) {
  for (const auto& s : set) {
    if (s.image.width != side || s.image.height != side)
      throw std::invalid_argument(std::string(which) +
                                  " sample size does not match network input side");
    if (s.mask.width != side || s.mask.height != side)
      throw std::invalid_argument(std::string(which) + " mask size does not match its image");
  }
}

struct BatchMetrics {
  double loss_sum = 0;  // per-sample losses summed
  double iou_sum = 0;
  size_t count = 0;
};

// Forward + loss + gradient for one assembled batch; returns grad of logits.
// Loss is averaged over batch elements.
double batch_loss_and_grad(Network& net, const Tensor& images, const std::vector<float>& targets,
                           Workspace& ws, GradStore& grads, double threshold,
                           BatchMetrics& metrics) {
  const int B = images.n;
  Tensor logits = net.forward_train(images, ws);
  Tensor probs = logits;
  sigmoid_inplace(probs);

  Tensor grad_logits(logits.n, logits.c, logits.h, logits.w);
  const size_t plane = logits.plane();
  double loss_total = 0;
  for (int i = 0; i < B; ++i) {
    std::span<const float> x(probs.item(i), plane);
    std::span<const float> t(targets.data() + i * plane, plane);
    const double loss = soft_dice_loss(x, t);
    loss_total += loss;
    const std::vector<double> gx = soft_dice_grad(x, t);
    float* gz = grad_logits.item(i);
    const float* xp = probs.item(i);
    for (size_t j = 0; j < plane; ++j)
      gz[j] = static_cast<float>(gx[j] / B) * xp[j] * (1.f - xp[j]);

    // IoU of the thresholded prediction against the batch target
    size_t inter = 0, uni = 0;
    for (size_t j = 0; j < plane; ++j) {
      const bool p = xp[j] >= threshold;
      const bool g = t[j] >= 0.5f;
      inter += p && g;
      uni += p || g;
    }
    metrics.iou_sum += uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
  }
  metrics.loss_sum += loss_total;
  metrics.count += B;

  grads.zero();
  net.backward(grad_logits, ws, grads);
  return loss_total / B;
}

// Mean validation loss and IoU in evaluation mode.
std::pair<double, double> validate_pass(const Network& net,
                                        const std::vector<AnnotatedSample>& val_set,
                                        int batch_size, double threshold) {
  const int S = net.config().input_side;
  const size_t plane = static_cast<size_t>(S) * S;
  double loss_sum = 0, iou_sum = 0;
  size_t done = 0;
  while (done < val_set.size()) {
    const int B = static_cast<int>(std::min<size_t>(batch_size, val_set.size() - done));
    Tensor images(B, 3, S, S);
    for (int i = 0; i < B; ++i) copy_image_into(val_set[done + i].image, images, i);
    Tensor probs = net.forward(images);
    sigmoid_inplace(probs);
    for (int i = 0; i < B; ++i) {
      const auto& mask = val_set[done + i].mask;
      std::vector<float> t(plane);
      for (size_t j = 0; j < plane; ++j) t[j] = mask.data[j];
      std::span<const float> x(probs.item(i), plane);
      loss_sum += soft_dice_loss(x, std::span<const float>(t));
      size_t inter = 0, uni = 0;
      const float* xp = probs.item(i);
      for (size_t j = 0; j < plane; ++j) {
        const bool p = xp[j] >= threshold;
        const bool g = mask.data[j] != 0;
        inter += p && g;
        uni += p || g;
      }
      iou_sum += uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
    }
    done += B;
  }
  return {loss_sum / val_set.size(), iou_sum / val_set.size()};
}

void emit_curve_plots(const std::vector<TrainingRecord>& records, const std::string& dir) {
  if (records.empty()) return;
  auto col = [&records](auto get) {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(get(r));
    return v;
  };
  const std::vector<double> epochs = col([](const TrainingRecord& r) { return double(r.epoch); });
  auto emit = [&](const std::string& name, const char* ylab, auto get_train, auto get_val,
                  size_t from) {
    std::vector<Series> ss;
    Series tr{"train", {}, {}}, va{"validation", {}, {}};
    for (size_t i = from; i < records.size(); ++i) {
      tr.x.push_back(epochs[i]);
      tr.y.push_back(get_train(records[i]));
      va.x.push_back(epochs[i]);
      va.y.push_back(get_val(records[i]));
    }
    ss.push_back(std::move(tr));
    ss.push_back(std::move(va));
    PlotOptions opt;
    opt.title = name;
    opt.xlabel = "epoch";
    opt.ylabel = ylab;
    opt.draw_points = true;
    plot_lines(ss, opt, (fs::path(dir) / (name + ".png")).string());
  };
  auto tl = [](const TrainingRecord& r) { return r.train_loss; };
  auto vl = [](const TrainingRecord& r) { return r.val_loss; };
  auto ti = [](const TrainingRecord& r) { return r.train_iou; };
  auto vi = [](const TrainingRecord& r) { return r.val_iou; };
  emit("loss", "soft dice loss", tl, vl, 0);
  emit("iou", "IoU", ti, vi, 0);
  const size_t half = records.size() / 2;
  emit("loss_last_half", "soft dice loss", tl, vl, half);
  emit("iou_last_half", "IoU", ti, vi, half);
}

void write_manifest(const TrainConfig& cfg, const std::vector<AnnotatedSample>& train_set,
                    const std::vector<AnnotatedSample>& val_set, const Network& net,
                    const TrainResult& result) {
  nlohmann::json j = {
      {"tag", cfg.tag},
      {"seed", cfg.seed},
      {"learning_rate", cfg.learning_rate},
      {"batch_size", cfg.batch_size},
      {"max_epochs", cfg.max_epochs},
      {"eval_every", cfg.eval_every},
      {"augment_enabled", cfg.augment_enabled},
      {"target_val_iou", cfg.target_val_iou},
      {"binarize_threshold", cfg.binarize_threshold},
      {"train_samples", train_set.size()},
      {"val_samples", val_set.size()},
      {"train_fingerprint", dataset_fingerprint(train_set)},
      {"val_fingerprint", dataset_fingerprint(val_set)},
      {"network",
       {{"depth", net.config().depth},
        {"base_width", net.config().base_width},
        {"input_side", net.config().input_side},
        {"use_batch_norm", net.config().use_batch_norm},
        {"batch_norm_affine", net.config().batch_norm_affine}}},
      {"best_epoch", result.best_epoch},
      {"best_val_iou", result.best_val_iou},
  };
  std::ofstream out(fs::path(cfg.out_dir) / "manifest.json");
  out << j.dump(2) << "\n";
}

}  // namespace

TrainResult train(Network& net, const std::vector<AnnotatedSample>& train_set,
                  const std::vector<AnnotatedSample>& val_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const int S = net.config().input_side;
  check_sample_shapes(train_set, S, "training");
  check_sample_shapes(val_set, S, "validation");
  if (!config.out_dir.empty()) fs::create_directories(config.out_dir);

  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 aug_rng(config.augmentation.seed ^ (config.seed * 0x9e3779b97f4a7c15ull));

  Adam adam(net, config.learning_rate);
  GradStore grads = net.make_grad_store();
  Workspace ws;

  TrainResult result;
  result.best_epoch = 0;
  result.best_val_iou = -1;

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const size_t plane = static_cast<size_t>(S) * S;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    net.mode = NetMode::training;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    BatchMetrics metrics;
    size_t done = 0;
    int batch_index = 0;
    while (done < order.size()) {
      const int B = static_cast<int>(std::min<size_t>(config.batch_size, order.size() - done));
      Tensor images(B, 3, S, S);
      std::vector<float> targets(static_cast<size_t>(B) * plane);
      for (int i = 0; i < B; ++i) {
        const AnnotatedSample& base = train_set[order[done + i]];
        if (config.augment_enabled) {
          AnnotatedSample a = augment(base, config.augmentation, aug_rng);
          copy_image_into(a.image, images, i);
          for (size_t j = 0; j < plane; ++j) targets[i * plane + j] = a.mask.data[j];
        } else {
          copy_image_into(base.image, images, i);
          for (size_t j = 0; j < plane; ++j) targets[i * plane + j] = base.mask.data[j];
        }
      }
      const double loss = batch_loss_and_grad(net, images, targets, ws, grads,
                                              config.binarize_threshold, metrics);
      if (!std::isfinite(loss)) throw TrainingDivergence(epoch, batch_index);
      adam.step(grads);
      done += B;
      ++batch_index;
    }

    const bool eval_now = (epoch % config.eval_every == 0) || epoch == config.max_epochs;
    if (!eval_now) continue;

    net.mode = NetMode::evaluation;
    TrainingRecord rec;
    rec.epoch = epoch;
    rec.train_loss = metrics.loss_sum / metrics.count;
    rec.train_iou = metrics.iou_sum / metrics.count;
    if (!val_set.empty()) {
      auto [vloss, viou] = validate_pass(net, val_set, config.batch_size,
                                         config.binarize_threshold);
      rec.val_loss = vloss;
      rec.val_iou = viou;
    } else {
      // no validation data: the columns mirror the training metrics
      rec.val_loss = rec.train_loss;
      rec.val_iou = rec.train_iou;
    }
    result.records.push_back(rec);

    if (rec.val_iou > result.best_val_iou) {
      result.best_val_iou = rec.val_iou;
      result.best_epoch = epoch;
      result.best = net;
      result.best.mode = NetMode::evaluation;
    }
    if (config.target_val_iou > 0 && rec.val_iou >= config.target_val_iou) break;
  }

  if (result.best_epoch == 0) {  // no evaluation ever ran with a better IoU
    result.best = net;
    result.best_epoch = config.max_epochs;
    result.best_val_iou = result.records.empty() ? 0 : result.records.back().val_iou;
  }
  net.mode = NetMode::evaluation;

  if (!config.out_dir.empty()) {
    write_curves_csv(result.records, (fs::path(config.out_dir) / "curves.csv").string());
    if (config.emit_plots) emit_curve_plots(result.records, config.out_dir);
    CheckpointMeta meta;
    meta.epoch = result.best_epoch;
    meta.validation_iou = result.best_val_iou;
    meta.name = checkpoint_name(config.tag, result.best_epoch);
    save_checkpoint(result.best, config.out_dir, meta);
    meta.name = "net_dic_" + config.tag + "_best";
    save_checkpoint(result.best, config.out_dir, meta);
    write_manifest(config, train_set, val_set, net, result);
  }
  return result;
}

TrainResult fine_tune(const Network& checkpoint, const std::vector<AnnotatedSample>& train_set,
                      const std::vector<AnnotatedSample>& val_set, TrainConfig config) {
  if (!train_set.empty()) {
    const int side = checkpoint.config().input_side;
    if (train_set.front().image.width != side || train_set.front().image.height != side)
      throw std::invalid_argument("fine_tune: dataset shape does not match checkpoint network");
  }
  Network net = checkpoint;  // continue from the stored parameters
  return train(net, train_set, val_set, config);
}

EvalResult evaluate(const Segmenter& segmenter, const std::vector<AnnotatedSample>& dataset,
                    bool augmented, const AugmentationConfig& aug, uint64_t seed,
                    double threshold) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::mt19937_64 rng(seed ^ aug.seed);
  EvalResult res;
  res.per_sample.reserve(dataset.size());
  for (const auto& sample : dataset) {
    const AnnotatedSample* s = &sample;
    AnnotatedSample scratch;
    if (augmented) {
      scratch = augment(sample, aug, rng);
      s = &scratch;
    }
    ProbMap p = segmenter.predict(s->image);
    res.per_sample.push_back(iou(binarize(p, threshold), s->mask));
  }
  res.mean_iou = std::accumulate(res.per_sample.begin(), res.per_sample.end(), 0.0) /
                 res.per_sample.size();
  return res;
}

EvalResult evaluate(const Network& net, const std::vector<AnnotatedSample>& dataset,
                    bool augmented, const AugmentationConfig& aug, uint64_t seed,
                    double threshold) {
  NetworkSegmenter seg(net, /*use_d4=*/false);
  return evaluate(seg, dataset, augmented, aug, seed, threshold);
}

AblationResult run_depth_ablation(const std::vector<AnnotatedSample>& scenes,
                                  const NetworkConfig& deep, const NetworkConfig& shallow,
                                  const TrainConfig& base, std::span<const uint64_t> seeds,
                                  const std::string& out_dir) {
  AblationResult result;
  for (uint64_t seed : seeds) {
    auto [tr, va] = split_dataset(scenes, 0.8, seed);
    AblationRow row;
    row.seed = seed;
    for (int variant = 0; variant < 2; ++variant) {
      const NetworkConfig& cfg = variant == 0 ? deep : shallow;
      Network net(cfg, seed + variant + 1);
      TrainConfig tc = base;
      tc.seed = seed;
      tc.out_dir.clear();  // per-variant artifacts are not kept, only the table
      TrainResult res = train(net, tr, va, tc);
      if (variant == 0) {
        row.deep_best_iou = res.best_val_iou;
        row.deep_best_epoch = res.best_epoch;
      } else {
        row.shallow_best_iou = res.best_val_iou;
        row.shallow_best_epoch = res.best_epoch;
      }
    }
    result.rows.push_back(row);
    std::cout << "ablation seed " << seed << ": deep " << row.deep_best_iou << " (epoch "
              << row.deep_best_epoch << ") vs shallow " << row.shallow_best_iou << " (epoch "
              << row.shallow_best_epoch << ")\n";
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    CsvTable t;
    t.header = {"seed", "deep_best_iou", "shallow_best_iou", "deep_best_epoch",
                "shallow_best_epoch"};
    for (const auto& r : result.rows)
      t.rows.push_back({std::to_string(r.seed), format_double(r.deep_best_iou),
                        format_double(r.shallow_best_iou), std::to_string(r.deep_best_epoch),
                        std::to_string(r.shallow_best_epoch)});
    write_csv(t, (fs::path(out_dir) / "ablation.csv").string());
  }
  return result;
}

void write_curves_csv(const std::vector<TrainingRecord>& records, const std::string& path) {
  CsvTable t;
  t.header = {"epoch", "train_loss", "val_loss", "train_iou", "val_iou"};
  for (const auto& r : records)
    t.rows.push_back({std::to_string(r.epoch), format_double(r.train_loss),
                      format_double(r.val_loss), format_double(r.train_iou),
                      format_double(r.val_iou)});
  write_csv(t, path);
}

std::vector<TrainingRecord> read_curves_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  std::vector<TrainingRecord> records;
  for (const auto& row : t.rows) {
    TrainingRecord r;
    r.epoch = static_cast<int>(parse_double(row.at(0)));
    r.train_loss = parse_double(row.at(1));
    r.val_loss = parse_double(row.at(2));
    r.train_iou = parse_double(row.at(3));
    r.val_iou = parse_double(row.at(4));
    records.push_back(r);
  }
  return records;
}

}  // namespace crop
