#pragma once

#include <cstdint>
#include <vector>

#include "crop/dataset.hpp"

namespace crop {

/// Declarative recipe for one synthetic scene: a central roundish blob over a
/// textured background with optional distractor blobs and clutter.
struct SceneSpec {
  int canvas_side = 128;
  double radius_min = 20;
  double radius_max = 40;
  double center_jitter = 0.05;  // fraction of canvas side
  double wobble = 0.06;         // boundary irregularity amplitude
  int distractor_count = 2;
  double clutter = 0.3;         // background texture/noise strength in [0,1]
  double blur_sigma = 0.0;      // image-only blur after compositing
  double brightness = 1.0;      // global multiplier, clamped to [0,1]

  void validate() const;
};

struct SyntheticScene {
  RasterImage image;
  BinaryMask mask;     // exact pixel-center rasterization of the central blob
  double true_area;    // mask pixel count
  double true_cx;      // centroid of mask pixel centers, photo coordinates
  double true_cy;
};

SyntheticScene generate_synthetic_scene(const SceneSpec& spec, uint64_t seed);

// Renders `count` scenes with per-scene derived seeds; sample ids are scene_<i>.
std::vector<AnnotatedSample> generate_scene_dataset(const SceneSpec& spec, int count,
                                                    uint64_t seed);

// Presets used by the command line and the test suites.
SceneSpec scene_preset_basic(int side);    // mild clutter, two distractors
SceneSpec scene_preset_hard(int side);     // heavy clutter and distractors
SceneSpec scene_preset_bright(int side);   // clean, well-lit domain
SceneSpec scene_preset_blurred(int side);  // dim, defocused domain

}  // namespace crop
