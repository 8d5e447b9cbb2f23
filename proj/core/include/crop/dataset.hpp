#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crop/image.hpp"

namespace crop {

/// One unit of training data: image plus rasterized ground truth.
struct AnnotatedSample {
  RasterImage image;
  BinaryMask mask;
  std::string source_id;
};

// Deterministic shuffle by seed, then split with train size = floor(fraction*N).
// The two halves are disjoint and cover the input. Throws on an empty list.
std::pair<std::vector<AnnotatedSample>, std::vector<AnnotatedSample>> split_dataset(
    std::vector<AnnotatedSample> samples, double train_fraction, uint64_t seed);

// Loads a directory of images/*.png with matching masks/*.png (same stem).
std::vector<AnnotatedSample> load_pair_dataset(const std::string& dir);

// Loads a directory of labelme-style annotations: every *.json next to its
// image; polygons are rasterized to masks. `central_label` selects the shape.
std::vector<AnnotatedSample> load_labelme_dataset(const std::string& dir,
                                                  const std::string& central_label = "");

// Either of the above, detected by the presence of a masks/ subdirectory.
std::vector<AnnotatedSample> load_dataset(const std::string& dir,
                                          const std::string& central_label = "");

// FNV-1a over image and mask bytes of every sample, for run manifests.
uint64_t dataset_fingerprint(const std::vector<AnnotatedSample>& samples);

}  // namespace crop
