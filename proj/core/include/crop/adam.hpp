#pragma once

#include "crop/network.hpp"

namespace crop {

/// Adam with the conventional moment coefficients.
class Adam {
 public:
  Adam(Network& net, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(const GradStore& grads);
  int steps_taken() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  Network& net_;
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace crop
