#include "crop/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crop {

const std::array<D4Element, 8>& d4_elements() {
  static const std::array<D4Element, 8> all = {
      D4Element{0, false}, D4Element{1, false}, D4Element{2, false}, D4Element{3, false},
      D4Element{0, true},  D4Element{1, true},  D4Element{2, true},  D4Element{3, true},
  };
  return all;
}

D4Element d4_compose(const D4Element& a, const D4Element& b) {
  // With g = R^k F^r (reflect first, rotate after): F R^k = R^{-k} F, so
  // (R^a F^s)(R^k F^r) = R^{a + (s ? -k : k)} F^{s xor r}.
  const int k = a.reflected ? (a.rotation - b.rotation) : (a.rotation + b.rotation);
  return D4Element{((k % 4) + 4) % 4, a.reflected != b.reflected};
}

D4Element d4_inverse(const D4Element& g) {
  if (g.reflected) return g;  // reflections are involutions: (R^k F)^2 = id
  return D4Element{(4 - g.rotation) % 4, false};
}

namespace {

// Generic square plane permutation shared by all typed overloads.
template <typename T>
void permute_plane(const T* src, T* dst, int S, const D4Element& g) {
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      // source coordinate of output pixel (x, y): undo rotation, then undo flip
      int sx = x, sy = y;
      switch (g.rotation) {  // inverse of k CCW quarter turns
        case 1: sx = S - 1 - y; sy = x; break;
        case 2: sx = S - 1 - x; sy = S - 1 - y; break;
        case 3: sx = y; sy = S - 1 - x; break;
        default: break;
      }
      if (g.reflected) sx = S - 1 - sx;
      dst[static_cast<size_t>(y) * S + x] = src[static_cast<size_t>(sy) * S + sx];
    }
}

void require_square(int w, int h) {
  if (w != h) throw std::invalid_argument("apply_d4: input must be square");
}

}  // namespace

RasterImage apply_d4(const RasterImage& img, const D4Element& g) {
  require_square(img.width, img.height);
  RasterImage out(img.width, img.height);
  for (int c = 0; c < 3; ++c)
    permute_plane(img.data.data() + c * img.plane(), out.data.data() + c * out.plane(),
                  img.width, g);
  return out;
}

ProbMap apply_d4(const ProbMap& map, const D4Element& g) {
  require_square(map.width, map.height);
  ProbMap out(map.width, map.height);
  permute_plane(map.data.data(), out.data.data(), map.width, g);
  return out;
}

BinaryMask apply_d4(const BinaryMask& mask, const D4Element& g) {
  require_square(mask.width, mask.height);
  BinaryMask out(mask.width, mask.height);
  permute_plane(mask.data.data(), out.data.data(), mask.width, g);
  return out;
}

Tensor to_tensor(const RasterImage& image) {
  Tensor t(1, 3, image.height, image.width);
  copy_image_into(image, t, 0);
  return t;
}

void copy_image_into(const RasterImage& image, Tensor& batch, int item) {
  if (batch.c != 3 || batch.h != image.height || batch.w != image.width)
    throw std::invalid_argument("copy_image_into: shape mismatch");
  std::copy(image.data.begin(), image.data.end(), batch.item(item));
}

RasterImage image_from_tensor(const Tensor& batch, int item) {
  RasterImage img(batch.w, batch.h);
  std::copy(batch.item(item), batch.item(item) + batch.item_size(), img.data.begin());
  return img;
}

ProbMap predict_averaged(const Network& net, const RasterImage& image, bool use_d4,
                         AveragingSpace space) {
  const int S = net.config().input_side;
  if (image.width != S || image.height != S)
    throw std::invalid_argument("predict_averaged: image side must equal network input side");

  if (!use_d4) {
    Tensor x = to_tensor(image);
    Tensor logits = net.forward(x);
    sigmoid_inplace(logits);
    ProbMap out(S, S);
    std::copy(logits.v.begin(), logits.v.end(), out.data.begin());
    return out;
  }

  const auto& gs = d4_elements();
  Tensor batch(8, 3, S, S);
  for (int i = 0; i < 8; ++i) copy_image_into(apply_d4(image, gs[i]), batch, i);
  Tensor logits = net.forward(batch);
  if (space == AveragingSpace::probability) sigmoid_inplace(logits);

  std::vector<double> acc(static_cast<size_t>(S) * S, 0.0);
  ProbMap pred(S, S);
  for (int i = 0; i < 8; ++i) {
    std::copy(logits.item(i), logits.item(i) + pred.data.size(), pred.data.begin());
    ProbMap back = apply_d4(pred, d4_inverse(gs[i]));
    for (size_t j = 0; j < acc.size(); ++j) acc[j] += back.data[j];
  }
  ProbMap out(S, S);
  if (space == AveragingSpace::probability) {
    for (size_t j = 0; j < acc.size(); ++j) out.data[j] = static_cast<float>(acc[j] / 8.0);
  } else {
    for (size_t j = 0; j < acc.size(); ++j)
      out.data[j] = static_cast<float>(1.0 / (1.0 + std::exp(-acc[j] / 8.0)));
  }
  return out;
}

BinaryMask binarize(const ProbMap& p, double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("binarize: threshold must be in (0,1)");
  BinaryMask mask(p.width, p.height);
  for (size_t i = 0; i < p.data.size(); ++i)
    mask.data[i] = p.data[i] >= threshold ? 1 : 0;
  return mask;
}

RasterImage render_overlay(const RasterImage& image, const BinaryMask& mask, double alpha) {
  if (image.width != mask.width || image.height != mask.height)
    throw std::invalid_argument("render_overlay: shape mismatch");
  if (alpha < 0 || alpha > 1) throw std::invalid_argument("render_overlay: alpha must be in [0,1]");
  const float a = static_cast<float>(alpha);
  RasterImage out = image;
  const float red[3] = {1.f, 0.f, 0.f};
  const float yellow[3] = {1.f, 1.f, 0.f};
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const float* tint = mask.at(y, x) ? red : yellow;
      for (int c = 0; c < 3; ++c)
        out.at(c, y, x) = (1 - a) * image.at(c, y, x) + a * tint[c];
    }
  return out;
}

}  // namespace crop
