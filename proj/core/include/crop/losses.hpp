#pragma once

#include <span>
#include <vector>

#include "crop/image.hpp"

namespace crop {

// Loss arithmetic runs in double precision. Predictions x are post-sigmoid
// values in [0,1]; targets t are exactly 0 or 1. All functions throw on a
// shape (length) mismatch.

// 1 - 2*sum(x*t) / (sum(x^2) + sum(t^2)); returns 0 when both sums vanish.
double soft_dice_loss(std::span<const double> x, std::span<const double> t);
// d(loss)/dx_k, same empty convention (zero gradient).
std::vector<double> soft_dice_grad(std::span<const double> x, std::span<const double> t);

// sum over pixels of -t*log(x) - (1-t)*log(1-x), x clamped to [eps, 1-eps].
inline constexpr double kCrossEntropyEps = 1e-7;
double cross_entropy_loss(std::span<const double> x, std::span<const double> t);
std::vector<double> cross_entropy_grad(std::span<const double> x, std::span<const double> t);

// sum over pixels of |x - t|^p, p >= 1.
double lp_loss(std::span<const double> x, std::span<const double> t, double p);
std::vector<double> lp_grad(std::span<const double> x, std::span<const double> t, double p);

// Jaccard index |A n B| / |A u B|; both masks empty -> 1 (perfect agreement).
double iou(const BinaryMask& a, const BinaryMask& b);

// Convenience float-span wrappers used by the training loop.
double soft_dice_loss(std::span<const float> x, std::span<const float> t);
std::vector<double> soft_dice_grad(std::span<const float> x, std::span<const float> t);

}  // namespace crop
