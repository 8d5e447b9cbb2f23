#pragma once

#include <cstdint>
#include <vector>

#include "crop/tensor.hpp"

namespace crop {

struct ConvCache {
  Tensor input;
};

struct BnCache {
  Tensor xhat;
  std::vector<float> inv_std;  // per channel
};

/// Plain convolution, weights [out_ch][in_ch][k][k]. Supports the two shapes
/// the architecture uses: 3x3 stride 1 pad 1 and 2x2 stride 2 pad 0, but the
/// implementation is generic im2col + GEMM.
struct Conv2d {
  int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
  std::vector<float> w, b;

  void init(int in_c, int out_c, int kernel, int stride_, int pad_);
  Tensor forward(const Tensor& x, ConvCache* cache) const;
  Tensor backward(const Tensor& gy, const ConvCache& cache, std::vector<float>& gw,
                  std::vector<float>& gb) const;
  int out_h(int in_h) const { return (in_h + 2 * pad - k) / stride + 1; }
};

/// Transposed convolution with kernel 2, stride 2 (exact upsampling by two;
/// output pixels partition, so no overlap handling). Weights [in_ch][out_ch][2][2].
struct ConvTranspose2d {
  int in_ch = 0, out_ch = 0;
  std::vector<float> w, b;

  void init(int in_c, int out_c);
  Tensor forward(const Tensor& x, ConvCache* cache) const;
  Tensor backward(const Tensor& gy, const ConvCache& cache, std::vector<float>& gw,
                  std::vector<float>& gb) const;
};

struct BatchNorm2d {
  int channels = 0;
  bool affine = false;
  float momentum = 0.1f;
  float eps = 1e-5f;
  std::vector<float> gamma, beta;        // trainable when affine
  std::vector<float> run_mean, run_var;  // running buffers

  void init(int ch, bool affine_);
  Tensor forward_train(const Tensor& x, BnCache& cache);  // updates running stats
  Tensor forward_eval(const Tensor& x) const;
  Tensor backward(const Tensor& gy, const BnCache& cache, std::vector<float>& ggamma,
                  std::vector<float>& gbeta) const;
};

// In-place ReLU; mask records active elements for the backward pass.
void relu_forward(Tensor& x, std::vector<uint8_t>* mask);
void relu_backward(Tensor& gy, const std::vector<uint8_t>& mask);

void sigmoid_inplace(Tensor& x);

}  // namespace crop
