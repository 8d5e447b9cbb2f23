#include "crop/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace crop {

Adam::Adam(Network& net, double learning_rate, double beta1, double beta2, double eps)
    : net_(net), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (learning_rate <= 0) throw std::invalid_argument("Adam: learning rate must be > 0");
  net_.for_each_param([this](const std::vector<float>& p) {
    m_.emplace_back(p.size(), 0.f);
    v_.emplace_back(p.size(), 0.f);
  });
}

void Adam::step(const GradStore& grads) {
  if (grads.g.size() != m_.size()) throw std::invalid_argument("Adam: gradient layout mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  size_t idx = 0;
  net_.for_each_param([&](std::vector<float>& p) {
    const std::vector<float>& g = grads.g[idx];
    std::vector<float>& m = m_[idx];
    std::vector<float>& v = v_[idx];
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * g[i]);
      v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * static_cast<double>(g[i]) * g[i]);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
    ++idx;
  });
}

}  // namespace crop
