// crop: central-object segmentation and fruit-size tracking toolkit.
//
// Subcommands: train, finetune, eval, ablate, segment, track, report, synth,
// probe. Exit codes: 0 success, 2 configuration/input error, 3 runtime
// numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "crop/csvio.hpp"
#include "crop/dataset.hpp"
#include "crop/runconfig.hpp"
#include "crop/synthetic.hpp"
#include "crop/tracker.hpp"
#include "crop/trainer.hpp"

namespace fs = std::filesystem;
using namespace crop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int check_device() {
  const char* dev = std::getenv("CROP_DEVICE");
  if (dev && std::string(dev) != "cpu") {
    std::cerr << "error: CROP_DEVICE='" << dev << "' is not supported; this build runs on cpu\n";
    return kExitConfig;
  }
  return kExitOk;
}

bool parse_center(const std::string& text, double& cx, double& cy) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) return false;
  try {
    cx = std::stod(text.substr(0, comma));
    cy = std::stod(text.substr(comma + 1));
  } catch (...) {
    return false;
  }
  return true;
}

std::vector<AnnotatedSample> load_training_data(const RunConfig& cfg) {
  if (cfg.dataset_dir.empty())
    throw std::runtime_error("config: data.dataset_dir is required for this command");
  if (!fs::exists(cfg.dataset_dir))
    throw std::runtime_error("dataset directory does not exist: " + cfg.dataset_dir);
  return load_dataset(cfg.dataset_dir, cfg.central_label);
}

void print_train_summary(const TrainResult& res, const std::string& out_dir) {
  std::cout << "best validation IoU " << res.best_val_iou << " at epoch " << res.best_epoch
            << "; " << res.records.size() << " evaluations recorded\n";
  if (!out_dir.empty()) std::cout << "artifacts written to " << out_dir << "\n";
}

int cmd_train(const std::string& config_path, const std::string& out_override,
              std::optional<uint64_t> seed_override, std::optional<int> epochs_override,
              bool finetune_mode, const std::string& checkpoint_path,
              std::optional<double> lr_override) {
  RunConfig cfg = load_run_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_override) cfg.seed = *seed_override;
  if (epochs_override) cfg.training.max_epochs = *epochs_override;
  if (lr_override) cfg.training.learning_rate = *lr_override;

  auto samples = load_training_data(cfg);
  auto [train_set, val_set] = split_dataset(samples, cfg.train_fraction, cfg.seed);
  std::cout << "dataset: " << samples.size() << " samples -> " << train_set.size() << " train / "
            << val_set.size() << " validation\n";

  TrainConfig tc = cfg.training;
  tc.seed = cfg.seed;
  tc.out_dir = cfg.out_dir;

  TrainResult res;
  if (finetune_mode) {
    if (checkpoint_path.empty()) throw std::runtime_error("finetune: --checkpoint is required");
    Network net = load_checkpoint(checkpoint_path);
    if (cfg.network_specified && net.config() != cfg.network)
      throw std::runtime_error("finetune: checkpoint architecture disagrees with config network");
    if (!lr_override && !cfg.learning_rate_explicit) tc.learning_rate = 1e-4;
    res = fine_tune(net, train_set, val_set, tc);
  } else {
    Network net(cfg.network, cfg.seed);
    res = train(net, train_set, val_set, tc);
  }
  print_train_summary(res, cfg.out_dir);
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir,
             const std::string& label, bool augmented, const std::string& out_csv) {
  Network net = load_checkpoint(checkpoint_path);
  auto samples = load_dataset(dataset_dir, label);
  EvalResult res = evaluate(net, samples, augmented);
  std::cout << "mean IoU over " << samples.size() << " samples: " << res.mean_iou
            << (augmented ? " (augmented)" : "") << "\n";
  if (!out_csv.empty()) {
    CsvTable t;
    t.header = {"sample", "iou"};
    for (size_t i = 0; i < samples.size(); ++i)
      t.rows.push_back({samples[i].source_id, format_double(res.per_sample[i])});
    write_csv(t, out_csv);
  }
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& out_override,
               int shallow_depth, int shallow_base, const std::string& seeds_text) {
  RunConfig cfg = load_run_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;

  std::vector<AnnotatedSample> scenes;
  if (!cfg.dataset_dir.empty()) {
    scenes = load_training_data(cfg);
  } else {
    SceneSpec spec = synth_scene_spec(cfg.synth);
    std::cout << "generating " << cfg.synth.count << " synthetic scenes (preset "
              << cfg.synth.preset << ")\n";
    scenes = generate_scene_dataset(spec, cfg.synth.count, cfg.seed);
  }

  NetworkConfig deep = cfg.network;
  NetworkConfig shallow = deep;
  shallow.depth = shallow_depth > 0 ? shallow_depth : std::max(1, deep.depth - 2);
  if (shallow_base > 0) shallow.base_width = shallow_base;

  std::vector<uint64_t> seeds;
  for (const auto& cell : split_csv_line(seeds_text))
    if (!cell.empty()) seeds.push_back(std::stoull(cell));
  if (seeds.empty()) seeds = {1, 2, 3};

  TrainConfig base = cfg.training;
  AblationResult res = run_depth_ablation(scenes, deep, shallow, base, seeds, cfg.out_dir);
  int deep_wins = 0;
  for (const auto& row : res.rows) deep_wins += row.deep_best_iou >= row.shallow_best_iou;
  std::cout << "deeper variant met or beat the shallow one in " << deep_wins << "/"
            << res.rows.size() << " seeds\n";
  return kExitOk;
}

int cmd_segment(const std::string& checkpoint_path, const std::string& image_path,
                const std::string& out_dir, bool no_d4, double threshold,
                const std::string& center_text, double window) {
  Network net = load_checkpoint(checkpoint_path);
  RasterImage photo = load_image(image_path);

  double cx = photo.width / 2.0, cy = photo.height / 2.0;
  if (!center_text.empty() && !parse_center(center_text, cx, cy))
    throw std::runtime_error("segment: --center expects x,y");
  double side = window > 0 ? window : std::min(photo.width, photo.height);

  NetworkSegmenter seg(net, !no_d4);
  CropWindow win{cx, cy, side, 1.0};
  CropResult crop = crop_resize(photo, win, net.config().input_side);
  ProbMap prob = seg.predict(crop.image);
  BinaryMask mask = binarize(prob, threshold);

  const fs::path base = out_dir.empty() ? fs::path(image_path).parent_path() : fs::path(out_dir);
  fs::create_directories(base);
  const std::string stem = fs::path(image_path).stem().string();
  save_image(render_overlay(crop.image, mask), (base / (stem + "_overlay.png")).string());
  save_probmap(prob, (base / (stem + "_prob.png")).string());
  save_mask(mask, (base / (stem + "_mask.png")).string());

  const double ratio = double(crop.geometry.window_side) / net.config().input_side;
  std::cout << "foreground pixels (network scale): " << mask.count() << "\n"
            << "estimated area (photo scale): " << mask.count() * ratio * ratio << "\n"
            << "forward_batches=" << seg.forward_batches() << "\n"
            << "outputs written to " << base.string() << "\n";
  return kExitOk;
}

int cmd_track(const std::string& checkpoint_path, const std::string& manifest_path,
              const std::string& center_text, double window, double cap,
              const std::string& out_dir, bool no_d4, double threshold) {
  double cx = 0, cy = 0;
  if (!parse_center(center_text, cx, cy))
    throw std::runtime_error("track: --center expects x,y");

  Network net = load_checkpoint(checkpoint_path);
  NetworkSegmenter seg(net, !no_d4);
  auto manifest = read_photo_manifest(manifest_path);

  TrackConfig tc;
  tc.base_window = window;
  tc.threshold = threshold;
  tc.out_dir = out_dir;

  const auto t0 = std::chrono::steady_clock::now();
  TrackSeries series = track_files(seg, manifest, cx, cy, tc);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  TrackSeries clamped = clamp_outliers(series, cap);
  write_track_csv(clamped, (fs::path(out_dir) / "clamped.csv").string());
  report(clamped, out_dir);

  size_t flagged = 0, capped = 0;
  for (const auto& r : clamped.records) {
    flagged += r.low_confidence;
    capped += r.clamped;
  }
  std::cout << "processed " << series.records.size() << " photos in " << seconds << " s ("
            << seconds / series.records.size() << " s/photo)\n"
            << "low-confidence frames: " << flagged << ", clamped frames: " << capped << "\n"
            << "output tree: " << out_dir << "\n";
  return kExitOk;
}

int cmd_report(const std::string& series_csv, const std::string& out_dir, double cap) {
  TrackSeries series = read_track_csv(series_csv);
  if (cap > 0) {
    series = clamp_outliers(series, cap);
    write_track_csv(series, (fs::path(out_dir) / "clamped.csv").string());
  }
  report(series, out_dir);
  std::cout << "plots and summaries written to " << out_dir << "\n";
  return kExitOk;
}

int cmd_synth(const std::string& config_path, const std::string& preset, int side, int count,
              uint64_t seed, const std::string& out_dir) {
  SceneSpec spec;
  int n = count;
  uint64_t s = seed;
  if (!config_path.empty()) {
    RunConfig cfg = load_run_config(config_path);
    spec = synth_scene_spec(cfg.synth);
    n = cfg.synth.count;
    s = cfg.seed;
  } else {
    spec = synth_scene_spec(RunConfig::Synth{preset, side, count, std::nullopt});
  }
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "masks");

  CsvTable truth;
  truth.header = {"sample", "true_area", "true_cx", "true_cy"};
  for (int i = 0; i < n; ++i) {
    SyntheticScene scene = generate_synthetic_scene(spec, s * 1000003ull + i);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d", i);
    save_image(scene.image, (fs::path(out_dir) / "images" / (std::string(name) + ".png")).string());
    save_mask(scene.mask, (fs::path(out_dir) / "masks" / (std::string(name) + ".png")).string());
    truth.rows.push_back({name, format_double(scene.true_area), format_double(scene.true_cx),
                          format_double(scene.true_cy)});
  }
  write_csv(truth, (fs::path(out_dir) / "truth.csv").string());
  std::cout << "wrote " << n << " scenes to " << out_dir << "\n";
  return kExitOk;
}

int cmd_probe(const std::string& image_path, int grid) {
  RasterImage photo = load_image(image_path);
  const int cells = std::max(4, grid);
  std::cout << "image " << photo.width << "x" << photo.height
            << "; cell size " << photo.width / cells << "x" << photo.height / cells << "\n    ";
  for (int gx = 0; gx < cells; ++gx)
    std::cout << (gx % 2 ? "  " : std::to_string(gx * photo.width / cells).substr(0, 6) + " ")
                     .substr(0, 7);
  std::cout << "\n";
  const char* shades = " .:-=+*#%@";
  for (int gy = 0; gy < cells; ++gy) {
    std::printf("%5d ", gy * photo.height / cells);
    for (int gx = 0; gx < cells; ++gx) {
      double sum = 0;
      int cnt = 0;
      for (int y = gy * photo.height / cells; y < (gy + 1) * photo.height / cells; ++y)
        for (int x = gx * photo.width / cells; x < (gx + 1) * photo.width / cells; ++x) {
          sum += (photo.at(0, y, x) + photo.at(1, y, x) + photo.at(2, y, x)) / 3.0;
          ++cnt;
        }
      const int level = std::min(9, int(10 * (cnt ? sum / cnt : 0)));
      std::cout << shades[level] << shades[level];
    }
    std::cout << "\n";
  }
  std::cout << "pick --center as x,y in original pixels, origin top-left\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"central-object segmentation and fruit growth tracking"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, dataset_dir, label, image_path, center_text;
  std::string manifest_path, series_csv, preset = "basic", seeds_text = "1,2,3";
  std::optional<uint64_t> seed_override;
  std::optional<int> epochs_override;
  std::optional<double> lr_override;
  double threshold = 0.5, window = 0, cap = 400000;
  bool no_d4 = false, augmented = false;
  int side = 128, count = 40, grid = 16, shallow_depth = 0, shallow_base = 0;
  uint64_t synth_seed = 0;

  app.add_option("--seed", seed_override, "override the configured seed")->group("global");

  auto* train_cmd = app.add_subcommand("train", "train a network from a run configuration");
  train_cmd->add_option("--config", config_path, "run configuration JSON")->required();
  train_cmd->add_option("--out", out_dir, "output directory override");
  train_cmd->add_option("--epochs", epochs_override, "max epochs override");
  train_cmd->add_option("--lr", lr_override, "learning rate override");

  auto* ft_cmd = app.add_subcommand("finetune", "continue training from a checkpoint");
  ft_cmd->add_option("--config", config_path, "run configuration JSON")->required();
  ft_cmd->add_option("--checkpoint", checkpoint, "network dictionary to start from")->required();
  ft_cmd->add_option("--out", out_dir, "output directory override");
  ft_cmd->add_option("--epochs", epochs_override, "max epochs override");
  ft_cmd->add_option("--lr", lr_override, "learning rate override (default 0.0001)");

  auto* eval_cmd = app.add_subcommand("eval", "mean IoU of a checkpoint over a dataset");
  eval_cmd->add_option("--checkpoint", checkpoint, "network dictionary")->required();
  eval_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
  eval_cmd->add_option("--label", label, "central-object label for labelme data");
  eval_cmd->add_flag("--augmented", augmented, "evaluate with augmentation");
  eval_cmd->add_option("--out", out_dir, "per-sample CSV path");

  auto* ablate_cmd = app.add_subcommand("ablate", "train deep vs shallow variants");
  ablate_cmd->add_option("--config", config_path, "run configuration JSON")->required();
  ablate_cmd->add_option("--out", out_dir, "output directory override");
  ablate_cmd->add_option("--shallow-depth", shallow_depth, "shallow variant depth");
  ablate_cmd->add_option("--shallow-base", shallow_base, "shallow variant base width");
  ablate_cmd->add_option("--seeds", seeds_text, "comma-separated seeds (default 1,2,3)");

  auto* seg_cmd = app.add_subcommand("segment", "segment the central object of one image");
  seg_cmd->add_option("--checkpoint", checkpoint, "network dictionary")->required();
  seg_cmd->add_option("--image", image_path, "input photo")->required();
  seg_cmd->add_option("--out", out_dir, "output directory (default: next to the image)");
  seg_cmd->add_flag("--no-d4", no_d4, "skip dihedral averaging (single forward)");
  seg_cmd->add_option("--threshold", threshold, "binarization threshold (default 0.5)");
  seg_cmd->add_option("--center", center_text, "target point x,y (default: image center)");
  seg_cmd->add_option("--window", window, "crop window side in pixels");

  auto* track_cmd = app.add_subcommand("track", "track a fruit across time-series photos");
  track_cmd->add_option("--checkpoint", checkpoint, "network dictionary")->required();
  track_cmd->add_option("--manifest", manifest_path, "photo directory or CSV manifest")->required();
  track_cmd->add_option("--center", center_text, "initial target point x,y")->required();
  track_cmd->add_option("--window", window, "measurement window side (default: auto)");
  track_cmd->add_option("--cap", cap, "outlier area clamp (default 400000)");
  track_cmd->add_option("--out", out_dir, "output directory")->required();
  track_cmd->add_flag("--no-d4", no_d4, "skip dihedral averaging");
  track_cmd->add_option("--threshold", threshold, "binarization threshold");

  auto* report_cmd = app.add_subcommand("report", "re-render plots from a tracking CSV");
  report_cmd->add_option("--series", series_csv, "raw or clamped tracking CSV")->required();
  report_cmd->add_option("--out", out_dir, "output directory")->required();
  report_cmd->add_option("--cap", cap, "apply an outlier clamp first (0 = off)");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene dataset");
  synth_cmd->add_option("--config", config_path, "run configuration JSON (synth section)");
  synth_cmd->add_option("--preset", preset, "basic | hard | bright | blurred");
  synth_cmd->add_option("--side", side, "canvas side in pixels");
  synth_cmd->add_option("--count", count, "number of scenes");
  synth_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* probe_cmd = app.add_subcommand("probe", "print an ASCII index grid of a photo");
  probe_cmd->add_option("--image", image_path, "input photo")->required();
  probe_cmd->add_option("--grid", grid, "grid cells per side (default 16)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (int rc = check_device(); rc != kExitOk) return rc;
  if (seed_override) synth_seed = *seed_override;

  try {
    if (*train_cmd)
      return cmd_train(config_path, out_dir, seed_override, epochs_override, false, "",
                       lr_override);
    if (*ft_cmd)
      return cmd_train(config_path, out_dir, seed_override, epochs_override, true, checkpoint,
                       lr_override);
    if (*eval_cmd) return cmd_eval(checkpoint, dataset_dir, label, augmented, out_dir);
    if (*ablate_cmd)
      return cmd_ablate(config_path, out_dir, shallow_depth, shallow_base, seeds_text);
    if (*seg_cmd)
      return cmd_segment(checkpoint, image_path, out_dir, no_d4, threshold, center_text, window);
    if (*track_cmd)
      return cmd_track(checkpoint, manifest_path, center_text, window, cap, out_dir, no_d4,
                       threshold);
    if (*report_cmd) return cmd_report(series_csv, out_dir, cap);
    if (*synth_cmd) return cmd_synth(config_path, preset, side, count, synth_seed, out_dir);
    if (*probe_cmd) return cmd_probe(image_path, grid);
  } catch (const TrainingDivergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
