#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace crop {

/// Dense NCHW float tensor.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, float fill = 0.f)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

  size_t size() const { return v.size(); }
  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t item_size() const { return static_cast<size_t>(c) * h * w; }

  float* item(int ni) { return v.data() + ni * item_size(); }
  const float* item(int ni) const { return v.data() + ni * item_size(); }
  float* chan(int ni, int ci) { return item(ni) + ci * plane(); }
  const float* chan(int ni, int ci) const { return item(ni) + ci * plane(); }

  float& at(int ni, int ci, int y, int x) { return v[((static_cast<size_t>(ni) * c + ci) * h + y) * w + x]; }
  float at(int ni, int ci, int y, int x) const { return v[((static_cast<size_t>(ni) * c + ci) * h + y) * w + x]; }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

// Channel-axis concatenation, [a | b].
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Splits dy of a concatenation back into the two channel ranges.
void split_channels(const Tensor& dy, int c_first, Tensor& da, Tensor& db);

}  // namespace crop
