#include "crop/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "crop/annotation.hpp"

namespace crop {

namespace fs = std::filesystem;

std::pair<std::vector<AnnotatedSample>, std::vector<AnnotatedSample>> split_dataset(
    std::vector<AnnotatedSample> samples, double train_fraction, uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("split_dataset: empty sample list");
  if (train_fraction < 0.0 || train_fraction > 1.0)
    throw std::invalid_argument("split_dataset: train_fraction must be in [0,1]");
  std::mt19937_64 rng(seed);
  std::shuffle(samples.begin(), samples.end(), rng);
  const size_t n_train =
      static_cast<size_t>(std::floor(train_fraction * static_cast<double>(samples.size())));
  std::vector<AnnotatedSample> train(samples.begin(), samples.begin() + n_train);
  std::vector<AnnotatedSample> val(samples.begin() + n_train, samples.end());
  return {std::move(train), std::move(val)};
}

std::vector<AnnotatedSample> load_pair_dataset(const std::string& dir) {
  const fs::path images = fs::path(dir) / "images";
  const fs::path masks = fs::path(dir) / "masks";
  if (!fs::is_directory(images) || !fs::is_directory(masks))
    throw std::runtime_error("pair dataset needs images/ and masks/ under " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<AnnotatedSample> out;
  for (const auto& f : files) {
    fs::path m = masks / (f.stem().string() + ".png");
    if (!fs::exists(m)) throw std::runtime_error("missing mask for " + f.string());
    AnnotatedSample s;
    s.image = load_image(f.string());
    s.mask = load_mask(m.string());
    if (s.image.width != s.mask.width || s.image.height != s.mask.height)
      throw std::runtime_error("image/mask size mismatch for " + f.string());
    s.source_id = f.stem().string();
    out.push_back(std::move(s));
  }
  if (out.empty()) throw std::runtime_error("no samples under " + dir);
  return out;
}

std::vector<AnnotatedSample> load_labelme_dataset(const std::string& dir,
                                                  const std::string& central_label) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<AnnotatedSample> out;
  for (const auto& f : files) {
    AnnotationFile ann = load_annotation(f.string(), central_label);
    fs::path img = f.parent_path() / ann.image_path;
    if (ann.image_path.empty() || !fs::exists(img)) {
      // fall back to a sibling image with the same stem
      for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        fs::path cand = f.parent_path() / (f.stem().string() + ext);
        if (fs::exists(cand)) { img = cand; break; }
      }
    }
    if (!fs::exists(img)) throw std::runtime_error("missing image for annotation " + f.string());
    AnnotatedSample s;
    s.image = load_image(img.string());
    if (s.image.width != ann.polygon.image_width || s.image.height != ann.polygon.image_height)
      throw std::runtime_error("annotation dimensions disagree with image: " + f.string());
    s.mask = rasterize_polygon(ann.polygon);
    s.source_id = f.stem().string();
    out.push_back(std::move(s));
  }
  if (out.empty()) throw std::runtime_error("no annotations under " + dir);
  return out;
}

std::vector<AnnotatedSample> load_dataset(const std::string& dir,
                                          const std::string& central_label) {
  if (fs::is_directory(fs::path(dir) / "masks")) return load_pair_dataset(dir);
  return load_labelme_dataset(dir, central_label);
}

uint64_t dataset_fingerprint(const std::vector<AnnotatedSample>& samples) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (const auto& s : samples) {
    mix(static_cast<uint64_t>(s.image.width));
    mix(static_cast<uint64_t>(s.image.height));
    for (float v : s.image.data) {
      uint32_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      mix(bits);
    }
    for (uint8_t v : s.mask.data) mix(v);
  }
  return h;
}

}  // namespace crop
