#pragma once

#include "depo/approx/params.hpp"

#include <cmath>

namespace depo::approx {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam on a flat parameter vector; descends the supplied gradient.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index n, AdamConfig config) : config_(config), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {
    if (!(config.learning_rate > 0.0)) throw InvariantError("learning rate must be positive");
  }

  void step(ParamVector& params, const Vector& grad) {
    if (grad.size() != m_.size() || params.size() != m_.size()) throw DimensionError("Adam: gradient size mismatch");
    if (!grad.allFinite()) throw NumericalError("Adam: non-finite gradient");
    ++t_;
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    params.values().array() -=
        config_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

/// target <- (1 - tau) target + tau source.
inline void soft_update(ParamVector& target, const ParamVector& source, double tau) {
  if (target.size() != source.size()) throw DimensionError("soft_update: size mismatch");
  target.values() = (1.0 - tau) * target.values() + tau * source.values();
}

}  // namespace depo::approx
