#include "crop/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crop {

namespace {
void check_shapes(size_t a, size_t b) {
  if (a != b) throw std::invalid_argument("loss: shape mismatch");
}
}  // namespace

double soft_dice_loss(std::span<const double> x, std::span<const double> t) {
  check_shapes(x.size(), t.size());
  double xt = 0, xx = 0, tt = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    xt += x[i] * t[i];
    xx += x[i] * x[i];
    tt += t[i] * t[i];
  }
  const double denom = xx + tt;
  if (denom == 0) return 0.0;
  return 1.0 - 2.0 * xt / denom;
}

std::vector<double> soft_dice_grad(std::span<const double> x, std::span<const double> t) {
  check_shapes(x.size(), t.size());
  double xt = 0, xx = 0, tt = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    xt += x[i] * t[i];
    xx += x[i] * x[i];
    tt += t[i] * t[i];
  }
  std::vector<double> g(x.size(), 0.0);
  const double denom = xx + tt;
  if (denom == 0) return g;
  const double d2 = denom * denom;
  for (size_t i = 0; i < x.size(); ++i)
    g[i] = -2.0 * (t[i] * denom - 2.0 * x[i] * xt) / d2;
  return g;
}

double cross_entropy_loss(std::span<const double> x, std::span<const double> t) {
  check_shapes(x.size(), t.size());
  double sum = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double xc = std::clamp(x[i], kCrossEntropyEps, 1.0 - kCrossEntropyEps);
    sum += -t[i] * std::log(xc) - (1.0 - t[i]) * std::log(1.0 - xc);
  }
  return sum;
}

std::vector<double> cross_entropy_grad(std::span<const double> x, std::span<const double> t) {
  check_shapes(x.size(), t.size());
  std::vector<double> g(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= kCrossEntropyEps || x[i] >= 1.0 - kCrossEntropyEps) continue;  // clamp region
    g[i] = -t[i] / x[i] + (1.0 - t[i]) / (1.0 - x[i]);
  }
  return g;
}

double lp_loss(std::span<const double> x, std::span<const double> t, double p) {
  if (p < 1.0) throw std::invalid_argument("lp_loss: p must be >= 1");
  check_shapes(x.size(), t.size());
  double sum = 0;
  for (size_t i = 0; i < x.size(); ++i) sum += std::pow(std::abs(x[i] - t[i]), p);
  return sum;
}

std::vector<double> lp_grad(std::span<const double> x, std::span<const double> t, double p) {
  if (p < 1.0) throw std::invalid_argument("lp_grad: p must be >= 1");
  check_shapes(x.size(), t.size());
  std::vector<double> g(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - t[i];
    if (d == 0) continue;
    g[i] = p * std::pow(std::abs(d), p - 1.0) * (d > 0 ? 1.0 : -1.0);
  }
  return g;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("iou: shape mismatch");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    inter += a.data[i] & b.data[i];
    uni += a.data[i] | b.data[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {
std::vector<double> widen(std::span<const float> v) {
  return std::vector<double>(v.begin(), v.end());
}
}  // namespace

double soft_dice_loss(std::span<const float> x, std::span<const float> t) {
  const auto xd = widen(x), td = widen(t);
  return soft_dice_loss(std::span<const double>(xd), std::span<const double>(td));
}

std::vector<double> soft_dice_grad(std::span<const float> x, std::span<const float> t) {
  const auto xd = widen(x), td = widen(t);
  return soft_dice_grad(std::span<const double>(xd), std::span<const double>(td));
}

}  // namespace crop
