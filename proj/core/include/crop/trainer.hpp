#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crop/augment.hpp"
#include "crop/dataset.hpp"
#include "crop/network.hpp"
#include "crop/predictor.hpp"

namespace crop {

struct TrainConfig {
  double learning_rate = 0.001;   // fine-tuning default is 0.0001
  int batch_size = 14;
  int max_epochs = 1;
  int eval_every = 10;
  bool augment_enabled = true;
  AugmentationConfig augmentation;
  uint64_t seed = 0;
  double binarize_threshold = 0.5;
  // Optional stop at the first evaluation whose validation IoU reaches this
  // value (0 disables). Used to bound long runs; best-checkpoint retention is
  // unaffected.
  double target_val_iou = 0.0;
  std::string out_dir;  // when set: curves CSV, plots, checkpoints, manifest
  std::string tag = "run";
  bool emit_plots = true;

  void validate() const;
};

struct TrainingRecord {
  int epoch = 0;
  double train_loss = 0, val_loss = 0;
  double train_iou = 0, val_iou = 0;
};

struct TrainResult {
  Network best;            // highest validation IoU (last epoch when no val set)
  int best_epoch = 0;
  double best_val_iou = 0;
  std::vector<TrainingRecord> records;
};

/// Raised when the loss turns non-finite; carries the offending epoch/batch.
struct TrainingDivergence : std::runtime_error {
  int epoch, batch;
  TrainingDivergence(int e, int b)
      : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(e) +
                           ", batch " + std::to_string(b)),
        epoch(e), batch(b) {}
};

// Soft-dice training with Adam: per epoch, shuffled mini-batches (final
// partial batch kept), loss on sigmoid(forward(batch)); every eval_every
// epochs (and on the last epoch) the validation IoU is computed with
// predictions binarized at the configured threshold and the best checkpoint
// retained. `net` is left in its final-epoch state.
TrainResult train(Network& net, const std::vector<AnnotatedSample>& train_set,
                  const std::vector<AnnotatedSample>& val_set, const TrainConfig& config);

// Same loop, continuing from the checkpoint's parameters with a fresh
// optimizer; throws when the dataset shape does not match the checkpoint.
TrainResult fine_tune(const Network& checkpoint, const std::vector<AnnotatedSample>& train_set,
                      const std::vector<AnnotatedSample>& val_set, TrainConfig config);

struct EvalResult {
  double mean_iou = 0;
  std::vector<double> per_sample;
};

// Per-sample IoU between binarized predictions and ground truth. With
// augmented = true each sample passes through one seeded augmentation draw
// first; augmented = false is fully deterministic.
EvalResult evaluate(const Segmenter& segmenter, const std::vector<AnnotatedSample>& dataset,
                    bool augmented = false, const AugmentationConfig& aug = AugmentationConfig{},
                    uint64_t seed = 0, double threshold = 0.5);
EvalResult evaluate(const Network& net, const std::vector<AnnotatedSample>& dataset,
                    bool augmented = false, const AugmentationConfig& aug = AugmentationConfig{},
                    uint64_t seed = 0, double threshold = 0.5);

struct AblationRow {
  uint64_t seed = 0;
  double deep_best_iou = 0, shallow_best_iou = 0;
  int deep_best_epoch = 0, shallow_best_epoch = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
};

// Trains the deep and shallow recipes under identical conditions (loss,
// optimizer, learning rate, batch size, epochs) with per-seed random splits
// and initializations, and reports the best validation IoU of each.
AblationResult run_depth_ablation(const std::vector<AnnotatedSample>& scenes,
                                  const NetworkConfig& deep, const NetworkConfig& shallow,
                                  const TrainConfig& base, std::span<const uint64_t> seeds,
                                  const std::string& out_dir = "");

void write_curves_csv(const std::vector<TrainingRecord>& records, const std::string& path);
std::vector<TrainingRecord> read_curves_csv(const std::string& path);

}  // namespace crop
