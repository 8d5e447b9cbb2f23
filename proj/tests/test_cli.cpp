#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crop/dataset.hpp"
#include "crop/image.hpp"
#include "crop/network.hpp"
#include "crop/synthetic.hpp"

using namespace crop;
namespace fs = std::filesystem;

namespace {

struct RunOutput {
  int exit_code;
  std::string output;  // stdout + stderr
};

RunOutput run_cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "crop_cli_out.txt";
  const std::string cmd = std::string(CROP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// A very small end-to-end configuration: 16x16 scenes, depth-1 net.
std::string tiny_config(const fs::path& dir, const std::string& dataset, int epochs) {
  const fs::path cfg = dir / "run.json";
  std::ofstream out(cfg);
  out << R"({
  "seed": 5,
  "out_dir": ")" << (dir / "out").string() << R"(",
  "network": {"depth": 1, "base_width": 2, "input_side": 16},
  "training": {"learning_rate": 0.001, "batch_size": 4, "max_epochs": )" << epochs << R"(,
               "eval_every": 2, "emit_plots": false},
  "augmentation": {"enabled": false},
  "data": {"dataset_dir": ")" << dataset << R"("}
})";
  return cfg.string();
}

std::string make_tiny_dataset(const fs::path& dir, int count) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  SceneSpec spec = scene_preset_basic(16);
  spec.distractor_count = 0;
  for (int i = 0; i < count; ++i) {
    SyntheticScene s = generate_synthetic_scene(spec, 900 + i);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03d.png", i);
    save_image(s.image, (dir / "images" / name).string());
    save_mask(s.mask, (dir / "masks" / name).string());
  }
  return dir.string();
}

}  // namespace

TEST_CASE("every subcommand supports --help with exit 0") {
  for (const char* sub : {"", "train", "finetune", "eval", "ablate", "segment", "track", "report",
                          "synth", "probe"}) {
    const std::string args = std::string(sub) + (sub[0] ? " --help" : "--help");
    RunOutput res = run_cli(args);
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("Usage") != std::string::npos);
  }
}

TEST_CASE("config validation failures exit with code 2 and name the key") {
  const fs::path dir = fresh_dir("crop_cli_badcfg");
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"seed": 1, "trainning": {"max_epochs": 3}})";
  }
  RunOutput res = run_cli("train --config " + (dir / "bad.json").string());
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("trainning") != std::string::npos);
  CHECK(res.output.find("valid keys") != std::string::npos);

  {
    std::ofstream out(dir / "badkey.json");
    out << R"({"training": {"max_epoch": 3}})";
  }
  RunOutput res2 = run_cli("train --config " + (dir / "badkey.json").string());
  CHECK(res2.exit_code == 2);
  CHECK(res2.output.find("max_epoch") != std::string::npos);
}

TEST_CASE("a missing dataset directory exits with code 2") {
  const fs::path dir = fresh_dir("crop_cli_nodata");
  const std::string cfg = tiny_config(dir, (dir / "does_not_exist").string(), 2);
  RunOutput res = run_cli("train --config " + cfg);
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("does_not_exist") != std::string::npos);
}

TEST_CASE("synth, train, segment and eval run end to end") {
  const fs::path dir = fresh_dir("crop_cli_e2e");
  RunOutput synth = run_cli("synth --preset basic --side 16 --count 8 --out " +
                            (dir / "data").string() + " --seed 3");
  REQUIRE(synth.exit_code == 0);
  CHECK(fs::exists(dir / "data" / "truth.csv"));
  CHECK(fs::exists(dir / "data" / "images" / "scene_0000.png"));

  const std::string cfg = tiny_config(dir, (dir / "data").string(), 4);
  RunOutput train_res = run_cli("train --config " + cfg);
  REQUIRE(train_res.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "curves.csv"));
  CHECK(fs::exists(dir / "out" / "manifest.json"));
  CHECK(fs::exists(dir / "out" / "net_dic_run_best"));
  CHECK(fs::exists(dir / "out" / "net_dic_run_best.json"));

  const std::string ckpt = (dir / "out" / "net_dic_run_best").string();
  const std::string img = (dir / "data" / "images" / "scene_0000.png").string();
  RunOutput seg = run_cli("segment --checkpoint " + ckpt + " --image " + img + " --out " +
                          (dir / "seg").string());
  REQUIRE(seg.exit_code == 0);
  CHECK(seg.output.find("forward_batches=1") != std::string::npos);  // one batch of 8
  CHECK(fs::exists(dir / "seg" / "scene_0000_overlay.png"));
  CHECK(fs::exists(dir / "seg" / "scene_0000_prob.png"));
  CHECK(fs::exists(dir / "seg" / "scene_0000_mask.png"));

  RunOutput seg_no_d4 = run_cli("segment --checkpoint " + ckpt + " --image " + img +
                                " --no-d4 --out " + (dir / "seg2").string());
  REQUIRE(seg_no_d4.exit_code == 0);
  CHECK(seg_no_d4.output.find("forward_batches=1") != std::string::npos);

  // threshold monotonicity: the 0.9 mask is a subset of the 0.5 mask
  RunOutput hi = run_cli("segment --checkpoint " + ckpt + " --image " + img +
                         " --threshold 0.9 --out " + (dir / "seg_hi").string());
  REQUIRE(hi.exit_code == 0);
  BinaryMask lo_mask = load_mask((dir / "seg" / "scene_0000_mask.png").string());
  BinaryMask hi_mask = load_mask((dir / "seg_hi" / "scene_0000_mask.png").string());
  for (size_t i = 0; i < lo_mask.data.size(); ++i)
    if (hi_mask.data[i]) CHECK(lo_mask.data[i]);

  RunOutput ev = run_cli("eval --checkpoint " + ckpt + " --dataset " + (dir / "data").string());
  CHECK(ev.exit_code == 0);
  CHECK(ev.output.find("mean IoU") != std::string::npos);

  RunOutput missing = run_cli("segment --checkpoint " + ckpt + " --image /no/such/img.png");
  CHECK(missing.exit_code == 2);
}

TEST_CASE("track produces the full output tree and is byte-deterministic") {
  const fs::path dir = fresh_dir("crop_cli_track");
  const std::string data = make_tiny_dataset(dir / "scenes", 8);
  const std::string cfg = tiny_config(dir, data, 4);
  REQUIRE(run_cli("train --config " + cfg).exit_code == 0);
  const std::string ckpt = (dir / "out" / "net_dic_run_best").string();

  // a short drifting sequence rendered from the synthetic generator
  fs::create_directories(dir / "frames");
  SceneSpec spec = scene_preset_basic(64);
  spec.distractor_count = 0;
  for (int i = 0; i < 6; ++i) {
    SyntheticScene s = generate_synthetic_scene(spec, 1234);  // static scene
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%02d.png", i);
    save_image(s.image, (dir / "frames" / name).string());
  }

  auto run_track = [&](const std::string& out) {
    return run_cli("track --checkpoint " + ckpt + " --manifest " + (dir / "frames").string() +
                   " --center 32,32 --window 40 --cap 400000 --no-d4 --out " + out);
  };
  RunOutput t1 = run_track((dir / "t1").string());
  REQUIRE(t1.exit_code == 0);
  CHECK(t1.output.find("processed 6 photos") != std::string::npos);
  for (const char* f : {"raw.csv", "clamped.csv", "plots/area_timeline.png",
                        "plots/measurements_box.png", "plots/positions.png",
                        "summary/timeline.csv", "summary/positions.csv", "summary/boxstats.csv"})
    CHECK(fs::exists(dir / "t1" / f));
  for (int i = 0; i < 6; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "photo_%06d.png", i);
    CHECK(fs::exists(dir / "t1" / "overlays" / name));
    CHECK(fs::exists(dir / "t1" / "thumbs" / name));
  }

  RunOutput t2 = run_track((dir / "t2").string());
  REQUIRE(t2.exit_code == 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  for (const char* f : {"raw.csv", "clamped.csv", "summary/timeline.csv",
                        "summary/positions.csv", "summary/boxstats.csv"})
    CHECK(slurp(dir / "t1" / f) == slurp(dir / "t2" / f));

  RunOutput bad_center = run_cli("track --checkpoint " + ckpt + " --manifest " +
                                 (dir / "frames").string() + " --center 9999,9999 --out " +
                                 (dir / "t3").string());
  CHECK(bad_center.exit_code == 2);

  RunOutput rep = run_cli("report --series " + (dir / "t1" / "raw.csv").string() + " --out " +
                          (dir / "rep").string() + " --cap 100");
  CHECK(rep.exit_code == 0);
  CHECK(fs::exists(dir / "rep" / "plots" / "area_timeline.png"));
  CHECK(fs::exists(dir / "rep" / "clamped.csv"));
}

TEST_CASE("training reruns with the same seed produce byte-identical CSVs") {
  const fs::path dir = fresh_dir("crop_cli_det");
  const std::string data = make_tiny_dataset(dir / "scenes", 8);
  const std::string cfg = tiny_config(dir, data, 4);
  REQUIRE(run_cli("train --config " + cfg + " --out " + (dir / "r1").string()).exit_code == 0);
  REQUIRE(run_cli("train --config " + cfg + " --out " + (dir / "r2").string()).exit_code == 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "r1" / "curves.csv") == slurp(dir / "r2" / "curves.csv"));
}

TEST_CASE("numerical failures in training exit with code 3") {
  const fs::path dir = fresh_dir("crop_cli_div");
  const std::string data = make_tiny_dataset(dir / "scenes", 4);
  const std::string cfg = tiny_config(dir, data, 2);

  // poison a checkpoint with an infinite weight, then fine-tune from it
  NetworkConfig nc{.depth = 1, .base_width = 2, .input_side = 16};
  Network net(nc, 1);
  bool first = true;
  net.for_each_param([&first](std::vector<float>& p) {
    if (first && !p.empty()) {
      p[0] = std::numeric_limits<float>::infinity();
      first = false;
    }
  });
  CheckpointMeta meta;
  meta.name = "net_dic_poison_00001";
  save_checkpoint(net, dir.string(), meta);

  RunOutput res = run_cli("finetune --config " + cfg + " --checkpoint " +
                          (dir / "net_dic_poison_00001").string());
  CHECK(res.exit_code == 3);
  CHECK(res.output.find("diverged") != std::string::npos);
}

TEST_CASE("unsupported CROP_DEVICE values exit with code 2") {
  RunOutput res = run_cli("probe --image /nonexistent.png");
  CHECK(res.exit_code == 2);  // unreadable image, cpu default accepted
  const std::string cmd = std::string("CROP_DEVICE=cuda ") + CROP_CLI_PATH + " probe --image x.png";
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
