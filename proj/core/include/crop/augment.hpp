#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "crop/dataset.hpp"

namespace crop {

struct Interval {
  double lo = 1.0;
  double hi = 1.0;
  bool is_identity() const { return lo == 1.0 && hi == 1.0; }
};

struct AugmentationConfig {
  double flip_probability = 0.5;
  std::vector<int> rotation_choices = {0, 90, 180, 270};  // degrees, CCW
  Interval scale_jitter = {0.9, 1.1};
  Interval brightness_jitter = {0.85, 1.15};
  Interval contrast_jitter = {0.85, 1.15};
  double blur_probability = 0.2;
  Interval blur_sigma = {0.5, 1.5};
  uint64_t seed = 0;

  void validate() const;
  static AugmentationConfig identity();
};

// Applies one random draw of the configured transforms. Geometric transforms
// (flip, right-angle rotation, scale jitter) hit image and mask identically,
// the mask through nearest-neighbor resampling; photometric jitter and blur
// touch the image only. Deterministic given the RNG state.
AnnotatedSample augment(const AnnotatedSample& sample, const AugmentationConfig& config,
                        std::mt19937_64& draw);

// Exact right-angle rotation (k * 90 degrees CCW) and horizontal flip; shared
// with tests. Work for non-square inputs (dimensions swap for odd k).
RasterImage rotate90(const RasterImage& img, int k);
BinaryMask rotate90(const BinaryMask& mask, int k);
RasterImage hflip(const RasterImage& img);
BinaryMask hflip(const BinaryMask& mask);

// Separable Gaussian blur with kernel radius ceil(3*sigma), edge-replicated.
RasterImage gaussian_blur(const RasterImage& img, double sigma);

}  // namespace crop
