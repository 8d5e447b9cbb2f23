#include "crop/runconfig.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace crop {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key)) continue;
    std::ostringstream msg;
    msg << "config: unknown key '" << key << "'";
    if (!where.empty()) msg << " in " << where;
    msg << "; valid keys:";
    for (const auto& k : allowed) msg << " " << k;
    throw std::runtime_error(msg.str());
  }
}

Interval read_interval(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2)
    throw std::runtime_error("config: " + where + " must be a [lo, hi] pair");
  return Interval{j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }

  RunConfig cfg;
  check_keys(j, {"seed", "out_dir", "network", "training", "augmentation", "data", "tracking",
                 "synth"},
             "");
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);

  if (j.contains("network")) {
    const json& n = j["network"];
    cfg.network_specified = true;
    check_keys(n, {"depth", "base_width", "input_side", "use_batch_norm", "batch_norm_affine"},
               "network");
    cfg.network.depth = n.value("depth", cfg.network.depth);
    cfg.network.base_width = n.value("base_width", cfg.network.base_width);
    cfg.network.input_side = n.value("input_side", cfg.network.input_side);
    cfg.network.use_batch_norm = n.value("use_batch_norm", cfg.network.use_batch_norm);
    cfg.network.batch_norm_affine = n.value("batch_norm_affine", cfg.network.batch_norm_affine);
  }

  if (j.contains("training")) {
    const json& t = j["training"];
    check_keys(t,
               {"learning_rate", "batch_size", "max_epochs", "eval_every", "train_fraction",
                "target_val_iou", "binarize_threshold", "tag", "emit_plots"},
               "training");
    auto& tc = cfg.training;
    cfg.learning_rate_explicit = t.contains("learning_rate");
    tc.learning_rate = t.value("learning_rate", tc.learning_rate);
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.max_epochs = t.value("max_epochs", tc.max_epochs);
    tc.eval_every = t.value("eval_every", tc.eval_every);
    tc.target_val_iou = t.value("target_val_iou", tc.target_val_iou);
    tc.binarize_threshold = t.value("binarize_threshold", tc.binarize_threshold);
    tc.tag = t.value("tag", tc.tag);
    tc.emit_plots = t.value("emit_plots", tc.emit_plots);
    cfg.train_fraction = t.value("train_fraction", cfg.train_fraction);
  }

  if (j.contains("augmentation")) {
    const json& a = j["augmentation"];
    check_keys(a,
               {"enabled", "flip_probability", "rotation_choices", "scale_jitter",
                "brightness_jitter", "contrast_jitter", "blur_probability", "blur_sigma", "seed"},
               "augmentation");
    auto& ac = cfg.training.augmentation;
    cfg.training.augment_enabled = a.value("enabled", cfg.training.augment_enabled);
    ac.flip_probability = a.value("flip_probability", ac.flip_probability);
    if (a.contains("rotation_choices"))
      ac.rotation_choices = a["rotation_choices"].get<std::vector<int>>();
    if (a.contains("scale_jitter")) ac.scale_jitter = read_interval(a["scale_jitter"], "scale_jitter");
    if (a.contains("brightness_jitter"))
      ac.brightness_jitter = read_interval(a["brightness_jitter"], "brightness_jitter");
    if (a.contains("contrast_jitter"))
      ac.contrast_jitter = read_interval(a["contrast_jitter"], "contrast_jitter");
    ac.blur_probability = a.value("blur_probability", ac.blur_probability);
    if (a.contains("blur_sigma")) ac.blur_sigma = read_interval(a["blur_sigma"], "blur_sigma");
    ac.seed = a.value("seed", ac.seed);
  }

  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, {"dataset_dir", "central_label"}, "data");
    cfg.dataset_dir = d.value("dataset_dir", cfg.dataset_dir);
    cfg.central_label = d.value("central_label", cfg.central_label);
  }

  if (j.contains("tracking")) {
    const json& t = j["tracking"];
    check_keys(t, {"base_window", "threshold", "cap", "use_d4", "save_overlays",
                   "save_thumbnails"},
               "tracking");
    cfg.tracking.base_window = t.value("base_window", cfg.tracking.base_window);
    cfg.tracking.threshold = t.value("threshold", cfg.tracking.threshold);
    cfg.tracking.cap = t.value("cap", cfg.tracking.cap);
    cfg.tracking.use_d4 = t.value("use_d4", cfg.tracking.use_d4);
    cfg.tracking.save_overlays = t.value("save_overlays", cfg.tracking.save_overlays);
    cfg.tracking.save_thumbnails = t.value("save_thumbnails", cfg.tracking.save_thumbnails);
  }

  if (j.contains("synth")) {
    const json& s = j["synth"];
    check_keys(s,
               {"preset", "side", "count", "radius_min", "radius_max", "center_jitter", "wobble",
                "distractor_count", "clutter", "blur_sigma", "brightness"},
               "synth");
    cfg.synth.preset = s.value("preset", cfg.synth.preset);
    cfg.synth.side = s.value("side", cfg.synth.side);
    cfg.synth.count = s.value("count", cfg.synth.count);
    const bool custom = s.contains("radius_min") || s.contains("radius_max") ||
                        s.contains("center_jitter") || s.contains("wobble") ||
                        s.contains("distractor_count") || s.contains("clutter") ||
                        s.contains("blur_sigma") || s.contains("brightness");
    if (custom) {
      SceneSpec spec = synth_scene_spec(RunConfig::Synth{cfg.synth.preset, cfg.synth.side,
                                                         cfg.synth.count, std::nullopt});
      spec.radius_min = s.value("radius_min", spec.radius_min);
      spec.radius_max = s.value("radius_max", spec.radius_max);
      spec.center_jitter = s.value("center_jitter", spec.center_jitter);
      spec.wobble = s.value("wobble", spec.wobble);
      spec.distractor_count = s.value("distractor_count", spec.distractor_count);
      spec.clutter = s.value("clutter", spec.clutter);
      spec.blur_sigma = s.value("blur_sigma", spec.blur_sigma);
      spec.brightness = s.value("brightness", spec.brightness);
      cfg.synth.custom = spec;
    }
  }
  return cfg;
}

SceneSpec synth_scene_spec(const RunConfig::Synth& synth) {
  if (synth.custom) return *synth.custom;
  if (synth.preset == "basic") return scene_preset_basic(synth.side);
  if (synth.preset == "hard") return scene_preset_hard(synth.side);
  if (synth.preset == "bright") return scene_preset_bright(synth.side);
  if (synth.preset == "blurred") return scene_preset_blurred(synth.side);
  throw std::runtime_error("config: unknown synth preset '" + synth.preset +
                           "'; valid presets: basic hard bright blurred");
}

}  // namespace crop
