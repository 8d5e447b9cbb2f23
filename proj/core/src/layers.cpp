#include "crop/layers.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace crop {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw std::invalid_argument("concat_channels: shape mismatch");
  Tensor out(a.n, a.c + b.c, a.h, a.w);
  const size_t pa = a.item_size(), pb = b.item_size();
  for (int i = 0; i < a.n; ++i) {
    std::memcpy(out.item(i), a.item(i), pa * sizeof(float));
    std::memcpy(out.item(i) + pa, b.item(i), pb * sizeof(float));
  }
  return out;
}

void split_channels(const Tensor& dy, int c_first, Tensor& da, Tensor& db) {
  da = Tensor(dy.n, c_first, dy.h, dy.w);
  db = Tensor(dy.n, dy.c - c_first, dy.h, dy.w);
  for (int i = 0; i < dy.n; ++i) {
    std::memcpy(da.item(i), dy.item(i), da.item_size() * sizeof(float));
    std::memcpy(db.item(i), dy.item(i) + da.item_size(), db.item_size() * sizeof(float));
  }
}

namespace {

// col is [in_ch*k*k, out_h*out_w] row-major.
void im2col(const float* x, int in_ch, int H, int W, int k, int stride, int pad, int oh, int ow,
            float* col) {
  const size_t ohw = static_cast<size_t>(oh) * ow;
  for (int ic = 0; ic < in_ch; ++ic) {
    const float* plane = x + static_cast<size_t>(ic) * H * W;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + ((static_cast<size_t>(ic) * k + ky) * k + kx) * ohw;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          float* dst = row + static_cast<size_t>(oy) * ow;
          if (iy < 0 || iy >= H) {
            std::memset(dst, 0, ow * sizeof(float));
            continue;
          }
          const float* src = plane + static_cast<size_t>(iy) * W;
          if (stride == 1) {
            // valid ox range for ix = ox - pad + kx in [0, W)
            const int x_shift = kx - pad;
            const int ox_lo = std::max(0, -x_shift);
            const int ox_hi = std::min(ow, W - x_shift);  // exclusive
            if (ox_lo > 0) std::memset(dst, 0, ox_lo * sizeof(float));
            if (ox_hi > ox_lo)
              std::memcpy(dst + ox_lo, src + ox_lo + x_shift, (ox_hi - ox_lo) * sizeof(float));
            if (ox_hi < ow) std::memset(dst + std::max(ox_hi, 0), 0,
                                        (ow - std::max(ox_hi, 0)) * sizeof(float));
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              dst[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.f;
            }
          }
        }
      }
  }
}

void col2im_add(const float* col, int in_ch, int H, int W, int k, int stride, int pad, int oh,
                int ow, float* x) {
  const size_t ohw = static_cast<size_t>(oh) * ow;
  for (int ic = 0; ic < in_ch; ++ic) {
    float* plane = x + static_cast<size_t>(ic) * H * W;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + ((static_cast<size_t>(ic) * k + ky) * k + kx) * ohw;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          float* dst = plane + static_cast<size_t>(iy) * W;
          const float* src = row + static_cast<size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
        }
      }
  }
}

}  // namespace

void Conv2d::init(int in_c, int out_c, int kernel, int stride_, int pad_) {
  in_ch = in_c;
  out_ch = out_c;
  k = kernel;
  stride = stride_;
  pad = pad_;
  w.assign(static_cast<size_t>(out_c) * in_c * kernel * kernel, 0.f);
  b.assign(out_c, 0.f);
}

Tensor Conv2d::forward(const Tensor& x, ConvCache* cache) const {
  if (x.c != in_ch) throw std::invalid_argument("Conv2d: channel mismatch");
  const int oh = out_h(x.h), ow = out_h(x.w);
  Tensor y(x.n, out_ch, oh, ow);
  const size_t K = static_cast<size_t>(in_ch) * k * k;
  const size_t ohw = static_cast<size_t>(oh) * ow;
  std::vector<float> col(K * ohw);
  MapConst W(w.data(), out_ch, K);
  for (int i = 0; i < x.n; ++i) {
    im2col(x.item(i), in_ch, x.h, x.w, k, stride, pad, oh, ow, col.data());
    MapMat Y(y.item(i), out_ch, ohw);
    Y.noalias() = W * MapConst(col.data(), K, ohw);
    for (int oc = 0; oc < out_ch; ++oc) Y.row(oc).array() += b[oc];
  }
  if (cache) cache->input = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& gy, const ConvCache& cache, std::vector<float>& gw,
                        std::vector<float>& gb) const {
  const Tensor& x = cache.input;
  const int oh = gy.h, ow = gy.w;
  const size_t K = static_cast<size_t>(in_ch) * k * k;
  const size_t ohw = static_cast<size_t>(oh) * ow;
  Tensor gx(x.n, x.c, x.h, x.w);
  std::vector<float> col(K * ohw), gcol(K * ohw);
  MapConst W(w.data(), out_ch, K);
  MapMat GW(gw.data(), out_ch, K);
  for (int i = 0; i < x.n; ++i) {
    im2col(x.item(i), in_ch, x.h, x.w, k, stride, pad, oh, ow, col.data());
    MapConst GY(gy.item(i), out_ch, ohw);
    GW.noalias() += GY * MapConst(col.data(), K, ohw).transpose();
    for (int oc = 0; oc < out_ch; ++oc) gb[oc] += GY.row(oc).sum();
    MapMat GC(gcol.data(), K, ohw);
    GC.noalias() = W.transpose() * GY;
    col2im_add(gcol.data(), in_ch, x.h, x.w, k, stride, pad, oh, ow, gx.item(i));
  }
  return gx;
}

void ConvTranspose2d::init(int in_c, int out_c) {
  in_ch = in_c;
  out_ch = out_c;
  w.assign(static_cast<size_t>(in_c) * out_c * 4, 0.f);
  b.assign(out_c, 0.f);
}

Tensor ConvTranspose2d::forward(const Tensor& x, ConvCache* cache) const {
  if (x.c != in_ch) throw std::invalid_argument("ConvTranspose2d: channel mismatch");
  const int oh = x.h * 2, ow = x.w * 2;
  Tensor y(x.n, out_ch, oh, ow);
  const size_t ihw = x.plane();
  std::vector<float> colT(static_cast<size_t>(out_ch) * 4 * ihw);
  MapConst W(w.data(), in_ch, static_cast<size_t>(out_ch) * 4);
  for (int i = 0; i < x.n; ++i) {
    MapMat CT(colT.data(), static_cast<size_t>(out_ch) * 4, ihw);
    CT.noalias() = W.transpose() * MapConst(x.item(i), in_ch, ihw);
    for (int oc = 0; oc < out_ch; ++oc) {
      float* plane = y.chan(i, oc);
      for (int t = 0; t < 4; ++t) {
        const int ky = t / 2, kx = t % 2;
        const float* src = colT.data() + (static_cast<size_t>(oc) * 4 + t) * ihw;
        for (int sy = 0; sy < x.h; ++sy) {
          float* dst = plane + static_cast<size_t>(2 * sy + ky) * ow + kx;
          const float* s = src + static_cast<size_t>(sy) * x.w;
          for (int sx = 0; sx < x.w; ++sx) dst[2 * sx] = s[sx] + b[oc];
        }
      }
    }
  }
  if (cache) cache->input = x;
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& gy, const ConvCache& cache, std::vector<float>& gw,
                                 std::vector<float>& gb) const {
  const Tensor& x = cache.input;
  const size_t ihw = x.plane();
  Tensor gx(x.n, x.c, x.h, x.w);
  std::vector<float> gcolT(static_cast<size_t>(out_ch) * 4 * ihw);
  MapConst W(w.data(), in_ch, static_cast<size_t>(out_ch) * 4);
  MapMat GW(gw.data(), in_ch, static_cast<size_t>(out_ch) * 4);
  for (int i = 0; i < x.n; ++i) {
    for (int oc = 0; oc < out_ch; ++oc) {
      const float* plane = gy.chan(i, oc);
      double gbsum = 0;
      for (int t = 0; t < 4; ++t) {
        const int ky = t / 2, kx = t % 2;
        float* dst = gcolT.data() + (static_cast<size_t>(oc) * 4 + t) * ihw;
        for (int sy = 0; sy < x.h; ++sy) {
          const float* s = plane + static_cast<size_t>(2 * sy + ky) * gy.w + kx;
          float* d = dst + static_cast<size_t>(sy) * x.w;
          for (int sx = 0; sx < x.w; ++sx) d[sx] = s[2 * sx];
        }
      }
      for (size_t j = 0; j < gy.plane(); ++j) gbsum += plane[j];
      gb[oc] += static_cast<float>(gbsum);
    }
    MapConst GC(gcolT.data(), static_cast<size_t>(out_ch) * 4, ihw);
    MapMat GX(gx.item(i), in_ch, ihw);
    GX.noalias() = W * GC;
    GW.noalias() += MapConst(x.item(i), in_ch, ihw) * GC.transpose();
  }
  return gx;
}

void BatchNorm2d::init(int ch, bool affine_) {
  channels = ch;
  affine = affine_;
  gamma.assign(ch, 1.f);
  beta.assign(ch, 0.f);
  run_mean.assign(ch, 0.f);
  run_var.assign(ch, 1.f);
}

Tensor BatchNorm2d::forward_train(const Tensor& x, BnCache& cache) {
  if (x.c != channels) throw std::invalid_argument("BatchNorm2d: channel mismatch");
  const size_t M = static_cast<size_t>(x.n) * x.plane();
  Tensor y(x.n, x.c, x.h, x.w);
  cache.xhat = Tensor(x.n, x.c, x.h, x.w);
  cache.inv_std.assign(channels, 0.f);
  for (int ci = 0; ci < channels; ++ci) {
    double sum = 0, sq = 0;
    for (int i = 0; i < x.n; ++i) {
      const float* p = x.chan(i, ci);
      for (size_t j = 0; j < x.plane(); ++j) {
        sum += p[j];
        sq += static_cast<double>(p[j]) * p[j];
      }
    }
    const double mean = sum / M;
    const double var = std::max(0.0, sq / M - mean * mean);
    const float istd = static_cast<float>(1.0 / std::sqrt(var + eps));
    cache.inv_std[ci] = istd;
    const float mu = static_cast<float>(mean);
    const float g = gamma[ci], be = beta[ci];
    for (int i = 0; i < x.n; ++i) {
      const float* p = x.chan(i, ci);
      float* xh = cache.xhat.chan(i, ci);
      float* out = y.chan(i, ci);
      for (size_t j = 0; j < x.plane(); ++j) {
        xh[j] = (p[j] - mu) * istd;
        out[j] = g * xh[j] + be;
      }
    }
    const double var_unbiased = M > 1 ? var * M / (M - 1.0) : var;
    run_mean[ci] = (1 - momentum) * run_mean[ci] + momentum * mu;
    run_var[ci] = (1 - momentum) * run_var[ci] + momentum * static_cast<float>(var_unbiased);
  }
  return y;
}

Tensor BatchNorm2d::forward_eval(const Tensor& x) const {
  if (x.c != channels) throw std::invalid_argument("BatchNorm2d: channel mismatch");
  Tensor y(x.n, x.c, x.h, x.w);
  for (int ci = 0; ci < channels; ++ci) {
    const float istd = 1.f / std::sqrt(run_var[ci] + eps);
    const float mu = run_mean[ci], g = gamma[ci], be = beta[ci];
    for (int i = 0; i < x.n; ++i) {
      const float* p = x.chan(i, ci);
      float* out = y.chan(i, ci);
      for (size_t j = 0; j < x.plane(); ++j) out[j] = g * (p[j] - mu) * istd + be;
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy, const BnCache& cache, std::vector<float>& ggamma,
                             std::vector<float>& gbeta) const {
  const size_t M = static_cast<size_t>(gy.n) * gy.plane();
  Tensor gx(gy.n, gy.c, gy.h, gy.w);
  for (int ci = 0; ci < channels; ++ci) {
    double sum_gy = 0, sum_gy_xh = 0;
    const float g = gamma[ci];
    for (int i = 0; i < gy.n; ++i) {
      const float* gp = gy.chan(i, ci);
      const float* xh = cache.xhat.chan(i, ci);
      for (size_t j = 0; j < gy.plane(); ++j) {
        sum_gy += gp[j];
        sum_gy_xh += static_cast<double>(gp[j]) * xh[j];
      }
    }
    if (affine) {
      ggamma[ci] += static_cast<float>(sum_gy_xh);
      gbeta[ci] += static_cast<float>(sum_gy);
    }
    const float istd = cache.inv_std[ci];
    const float k1 = static_cast<float>(g * sum_gy / M);
    const float k2 = static_cast<float>(g * sum_gy_xh / M);
    for (int i = 0; i < gy.n; ++i) {
      const float* gp = gy.chan(i, ci);
      const float* xh = cache.xhat.chan(i, ci);
      float* out = gx.chan(i, ci);
      for (size_t j = 0; j < gy.plane(); ++j)
        out[j] = istd * (g * gp[j] - k1 - xh[j] * k2);
    }
  }
  return gx;
}

void relu_forward(Tensor& x, std::vector<uint8_t>* mask) {
  if (mask) mask->assign(x.size(), 0);
  for (size_t i = 0; i < x.size(); ++i) {
    if (x.v[i] > 0) {
      if (mask) (*mask)[i] = 1;
    } else {
      x.v[i] = 0;
    }
  }
}

void relu_backward(Tensor& gy, const std::vector<uint8_t>& mask) {
  if (mask.size() != gy.size()) throw std::invalid_argument("relu_backward: mask mismatch");
  for (size_t i = 0; i < gy.size(); ++i)
    if (!mask[i]) gy.v[i] = 0;
}

void sigmoid_inplace(Tensor& x) {
  for (float& v : x.v) v = 1.f / (1.f + std::exp(-v));
}

}  // namespace crop
