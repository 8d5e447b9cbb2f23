#include "crop/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crop {

void AugmentationConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(flip_probability) || !prob(blur_probability))
    throw std::invalid_argument("augmentation: probabilities must be in [0,1]");
  for (int r : rotation_choices)
    if (r != 0 && r != 90 && r != 180 && r != 270)
      throw std::invalid_argument("augmentation: rotations must be multiples of 90 degrees");
  auto iv = [](const Interval& i) {
    return std::isfinite(i.lo) && std::isfinite(i.hi) && i.lo <= i.hi;
  };
  if (!iv(scale_jitter) || !iv(brightness_jitter) || !iv(contrast_jitter) || !iv(blur_sigma))
    throw std::invalid_argument("augmentation: ranges must be finite and non-empty");
  if (scale_jitter.lo <= 0) throw std::invalid_argument("augmentation: scale must be positive");
}

AugmentationConfig AugmentationConfig::identity() {
  AugmentationConfig c;
  c.flip_probability = 0;
  c.rotation_choices = {0};
  c.scale_jitter = {1, 1};
  c.brightness_jitter = {1, 1};
  c.contrast_jitter = {1, 1};
  c.blur_probability = 0;
  return c;
}

RasterImage rotate90(const RasterImage& img, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return img;
  const int W = img.width, H = img.height;
  const bool swap = (k % 2) == 1;
  RasterImage out(swap ? H : W, swap ? W : H);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        int sx, sy;
        switch (k) {
          case 1: sx = W - 1 - y; sy = x; break;
          case 2: sx = W - 1 - x; sy = H - 1 - y; break;
          default: sx = y; sy = H - 1 - x; break;
        }
        out.at(c, y, x) = img.at(c, sy, sx);
      }
  return out;
}

BinaryMask rotate90(const BinaryMask& mask, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return mask;
  const int W = mask.width, H = mask.height;
  const bool swap = (k % 2) == 1;
  BinaryMask out(swap ? H : W, swap ? W : H);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      int sx, sy;
      switch (k) {
        case 1: sx = W - 1 - y; sy = x; break;
        case 2: sx = W - 1 - x; sy = H - 1 - y; break;
        default: sx = y; sy = H - 1 - x; break;
      }
      out.at(y, x) = mask.at(sy, sx);
    }
  return out;
}

RasterImage hflip(const RasterImage& img) {
  RasterImage out(img.width, img.height);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

BinaryMask hflip(const BinaryMask& mask) {
  BinaryMask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) out.at(y, x) = mask.at(y, mask.width - 1 - x);
  return out;
}

namespace {

// Central zoom keeping dimensions; s > 1 magnifies, s < 1 shrinks with
// edge-replicated borders.
RasterImage zoom_image(const RasterImage& img, double s) {
  RasterImage out(img.width, img.height);
  const double cx = img.width / 2.0, cy = img.height / 2.0;
  for (int y = 0; y < img.height; ++y) {
    const double sy = cy + (y + 0.5 - cy) / s - 0.5;
    const int y_lo = static_cast<int>(std::floor(sy));
    const float fy = static_cast<float>(sy - y_lo);
    const int y0 = std::clamp(y_lo, 0, img.height - 1);
    const int y1 = std::clamp(y_lo + 1, 0, img.height - 1);
    for (int x = 0; x < img.width; ++x) {
      const double sx = cx + (x + 0.5 - cx) / s - 0.5;
      const int x_lo = static_cast<int>(std::floor(sx));
      const float fx = static_cast<float>(sx - x_lo);
      const int x0 = std::clamp(x_lo, 0, img.width - 1);
      const int x1 = std::clamp(x_lo + 1, 0, img.width - 1);
      for (int c = 0; c < 3; ++c) {
        const float top = img.at(c, y0, x0) + (img.at(c, y0, x1) - img.at(c, y0, x0)) * fx;
        const float bot = img.at(c, y1, x0) + (img.at(c, y1, x1) - img.at(c, y1, x0)) * fx;
        out.at(c, y, x) = top + (bot - top) * fy;
      }
    }
  }
  return out;
}

BinaryMask zoom_mask(const BinaryMask& mask, double s) {
  BinaryMask out(mask.width, mask.height);
  const double cx = mask.width / 2.0, cy = mask.height / 2.0;
  for (int y = 0; y < mask.height; ++y) {
    const double sy = cy + (y + 0.5 - cy) / s - 0.5;
    const int yn = std::clamp(static_cast<int>(std::lround(sy)), 0, mask.height - 1);
    for (int x = 0; x < mask.width; ++x) {
      const double sx = cx + (x + 0.5 - cx) / s - 0.5;
      const int xn = std::clamp(static_cast<int>(std::lround(sx)), 0, mask.width - 1);
      out.at(y, x) = mask.at(yn, xn);
    }
  }
  return out;
}

}  // namespace

RasterImage gaussian_blur(const RasterImage& img, double sigma) {
  if (sigma <= 0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> kernel(2 * radius + 1);
  float sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
    sum += kernel[i + radius];
  }
  for (float& k : kernel) k /= sum;

  RasterImage tmp(img.width, img.height), out(img.width, img.height);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * img.at(c, y, std::clamp(x + i, 0, img.width - 1));
        tmp.at(c, y, x) = acc;
      }
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp.at(c, std::clamp(y + i, 0, img.height - 1), x);
        out.at(c, y, x) = acc;
      }
  }
  return out;
}

AnnotatedSample augment(const AnnotatedSample& sample, const AugmentationConfig& config,
                        std::mt19937_64& draw) {
  config.validate();
  AnnotatedSample out = sample;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (config.flip_probability > 0 && unit(draw) < config.flip_probability) {
    out.image = hflip(out.image);
    out.mask = hflip(out.mask);
  }
  if (!config.rotation_choices.empty() &&
      !(config.rotation_choices.size() == 1 && config.rotation_choices[0] == 0)) {
    std::uniform_int_distribution<size_t> pick(0, config.rotation_choices.size() - 1);
    const int k = config.rotation_choices[pick(draw)] / 90;
    if (k != 0) {
      out.image = rotate90(out.image, k);
      out.mask = rotate90(out.mask, k);
    }
  }
  if (!config.scale_jitter.is_identity()) {
    std::uniform_real_distribution<double> d(config.scale_jitter.lo, config.scale_jitter.hi);
    const double s = d(draw);
    out.image = zoom_image(out.image, s);
    out.mask = zoom_mask(out.mask, s);
  }
  if (!config.brightness_jitter.is_identity()) {
    std::uniform_real_distribution<double> d(config.brightness_jitter.lo,
                                             config.brightness_jitter.hi);
    const float b = static_cast<float>(d(draw));
    for (float& v : out.image.data) v = std::clamp(v * b, 0.f, 1.f);
  }
  if (!config.contrast_jitter.is_identity()) {
    std::uniform_real_distribution<double> d(config.contrast_jitter.lo, config.contrast_jitter.hi);
    const float c = static_cast<float>(d(draw));
    double mean = 0;
    for (float v : out.image.data) mean += v;
    const float mu = static_cast<float>(mean / out.image.data.size());
    for (float& v : out.image.data) v = std::clamp((v - mu) * c + mu, 0.f, 1.f);
  }
  if (config.blur_probability > 0 && unit(draw) < config.blur_probability) {
    std::uniform_real_distribution<double> d(config.blur_sigma.lo, config.blur_sigma.hi);
    out.image = gaussian_blur(out.image, d(draw));
  }
  return out;
}

}  // namespace crop
