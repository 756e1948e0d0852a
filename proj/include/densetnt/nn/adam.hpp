#pragma once

#include <cmath>
#include <vector>

#include "densetnt/nn/tape.hpp"

namespace densetnt::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment update with bias correction. Moments live on the
/// parameters themselves; the step counter lives here.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Parameter*>& params) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Parameter* p : params) {
      p->moment1 = cfg_.beta1 * p->moment1 + (1.0 - cfg_.beta1) * p->grad;
      p->moment2 = cfg_.beta2 * p->moment2 + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
      const auto mhat = p->moment1.array() / c1;
      const auto vhat = p->moment2.array() / c2;
      p->value.array() -= cfg_.lr * mhat / (vhat.sqrt() + cfg_.eps);
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace densetnt::nn
