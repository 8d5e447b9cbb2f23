#pragma once

#include <optional>
#include <string>

#include "crop/network.hpp"
#include "crop/synthetic.hpp"
#include "crop/trainer.hpp"
#include "crop/tracker.hpp"

namespace crop {

/// One declarative file that captures a run: network, training, augmentation,
/// data, tracking, synthesis, seeds and output paths. Unknown keys are
/// rejected with an error naming the valid key set.
struct RunConfig {
  uint64_t seed = 0;
  std::string out_dir = "runs/out";

  NetworkConfig network{.depth = 4, .base_width = 16, .input_side = 128};
  bool network_specified = false;       // the file carried a network section
  TrainConfig training;
  bool learning_rate_explicit = false;  // the file set training.learning_rate
  double train_fraction = 0.8;

  std::string dataset_dir;
  std::string central_label;

  struct Tracking {
    double base_window = 0;
    double threshold = 0.5;
    double cap = 400000;
    bool use_d4 = true;
    bool save_overlays = true;
    bool save_thumbnails = true;
  } tracking;

  struct Synth {
    std::string preset = "basic";  // basic | hard | bright | blurred
    int side = 128;
    int count = 40;
    std::optional<SceneSpec> custom;  // overrides the preset when present
  } synth;
};

RunConfig load_run_config(const std::string& path);
SceneSpec synth_scene_spec(const RunConfig::Synth& synth);

}  // namespace crop
