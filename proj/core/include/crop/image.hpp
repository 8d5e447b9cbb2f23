#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace crop {

/// RGB image with planar channel layout and intensities in [0,1].
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 planes, each height*width, R then G then B

  RasterImage() = default;
  RasterImage(int w, int h, float fill = 0.f)
      : width(w), height(h), data(static_cast<size_t>(3) * w * h, fill) {
    if (w < 1 || h < 1) throw std::invalid_argument("RasterImage: side must be >= 1");
  }

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t plane() const { return static_cast<size_t>(width) * height; }
  bool same_size(const RasterImage& o) const { return width == o.width && height == o.height; }
};

/// Per-pixel foreground labels, 0 = background, 1 = central object.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int w, int h, uint8_t fill = 0)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
  size_t count() const;
  bool operator==(const BinaryMask& o) const = default;
};

/// Per-pixel probabilities in [0,1] at network resolution.
struct ProbMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  ProbMap() = default;
  ProbMap(int w, int h, float fill = 0.f)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  float& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
};

// PNG/JPEG I/O (8-bit RGB). Intensities are mapped v <-> round(v*255).
RasterImage load_image(const std::string& path);
void save_image(const RasterImage& img, const std::string& path);

// Masks are stored as 8-bit grayscale PNG, 0/255; >=128 reads back as 1.
BinaryMask load_mask(const std::string& path);
void save_mask(const BinaryMask& mask, const std::string& path);

// Probability maps are stored as 16-bit grayscale PNG, v <-> round(v*65535).
ProbMap load_probmap(const std::string& path);
void save_probmap(const ProbMap& map, const std::string& path);

}  // namespace crop
