#pragma once

// Deterministic planar point mass; a small stand-in for continuous-control benchmarks.
// State (px, py, vx, vy); raw actions are clipped to [-1, 1] and passed through the
// active action transform before they act as an acceleration.

#include "depo/errors.hpp"
#include "depo/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace depo::envs {

enum class ActionTransform { normal, inverted, complex_double };

inline std::string to_string(ActionTransform t) {
  switch (t) {
    case ActionTransform::normal: return "normal";
    case ActionTransform::inverted: return "inverted";
    case ActionTransform::complex_double: return "complex_double";
  }
  return "?";
}

inline ActionTransform parse_action_transform(const std::string& name) {
  if (name == "normal") return ActionTransform::normal;
  if (name == "inverted") return ActionTransform::inverted;
  if (name == "complex_double") return ActionTransform::complex_double;
  throw InvariantError("unknown action transform '" + name + "'");
}

/// Raw action dimension for a given effective (acceleration) dimension.
inline Eigen::Index raw_action_dim(ActionTransform t, Eigen::Index effective_dim) {
  return t == ActionTransform::complex_double ? 2 * effective_dim : effective_dim;
}

inline Eigen::VectorXd apply_transform(ActionTransform t, const Eigen::VectorXd& a) {
  switch (t) {
    case ActionTransform::normal: return a;
    case ActionTransform::inverted: return -a;
    case ActionTransform::complex_double: {
      if (a.size() % 2 != 0) throw DimensionError("complex_double needs an even action dimension");
      const auto m = a.size() / 2;
      return ((-(a.head(m).array() + 1.0).exp()) + a.tail(m).array().exp()) / 1.5;
    }
  }
  return a;
}

struct PointMassConfig {
  double dt = 0.05;
  double v_max = 2.0;
  double goal_radius = 0.1;
  int horizon = 400;
  double start_box = 1.0;  // start positions uniform in [-start_box, start_box]^2, zero velocity
  ActionTransform transform = ActionTransform::normal;
};

class PointMass {
 public:
  static constexpr Eigen::Index kStateDim = 4;
  static constexpr Eigen::Index kEffectiveActionDim = 2;

  explicit PointMass(PointMassConfig config = {}) : config_(config) {
    if (!(config_.dt > 0) || !(config_.v_max > 0) || !(config_.goal_radius > 0) || config_.horizon < 1)
      throw InvariantError("point-mass parameters must be positive");
  }

  const PointMassConfig& config() const { return config_; }
  Eigen::Index state_dim() const { return kStateDim; }
  Eigen::Index action_dim() const { return raw_action_dim(config_.transform, kEffectiveActionDim); }
  int horizon() const { return config_.horizon; }

  Eigen::VectorXd sample_start(Rng& rng) const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(kStateDim);
    s(0) = uniform(rng, -config_.start_box, config_.start_box);
    s(1) = uniform(rng, -config_.start_box, config_.start_box);
    return s;
  }

  Eigen::VectorXd effective_action(const Eigen::VectorXd& raw) const {
    if (raw.size() != action_dim()) throw DimensionError("point-mass action has wrong dimension");
    if (!raw.allFinite()) throw NumericalError("non-finite point-mass action");
    return apply_transform(config_.transform, raw.cwiseMax(-1.0).cwiseMin(1.0));
  }

  /// p' = p + v dt; v' = clip(v + a_eff dt, +-v_max).
  Eigen::VectorXd step(const Eigen::VectorXd& s, const Eigen::VectorXd& raw_action) const {
    if (s.size() != kStateDim) throw DimensionError("point-mass state has wrong dimension");
    const Eigen::VectorXd a = effective_action(raw_action);
    Eigen::VectorXd next(kStateDim);
    next.head<2>() = s.head<2>() + config_.dt * s.tail<2>();
    next.tail<2>() = (s.tail<2>() + config_.dt * a).cwiseMax(-config_.v_max).cwiseMin(config_.v_max);
    return next;
  }

  bool in_goal(const Eigen::VectorXd& s) const { return s.head<2>().norm() <= config_.goal_radius; }

  /// Environment reward used when training without a discriminator.
  double reward(const Eigen::VectorXd& next) const { return -next.head<2>().norm(); }

  /// Exact inverse dynamics under the normal transform: the clipped action realizing v'.
  Eigen::VectorXd true_inverse_dynamics(const Eigen::VectorXd& s, const Eigen::VectorXd& next) const {
    Eigen::VectorXd a = (next.tail<2>() - s.tail<2>()) / config_.dt;
    if (config_.transform == ActionTransform::inverted) a = -a;
    else if (config_.transform == ActionTransform::complex_double)
      throw PreconditionError("no closed-form inverse dynamics for complex_double");
    return a.cwiseMax(-1.0).cwiseMin(1.0);
  }

 private:
  PointMassConfig config_;
};

struct PdGains {
  double kp = 2.0;
  double kd = 3.0;
};

/// a = clip(-kp p - kd v) under the normal transform.
inline Eigen::VectorXd pointmass_expert_action(const PdGains& gains, const Eigen::VectorXd& s) {
  return (-gains.kp * s.head<2>() - gains.kd * s.tail<2>()).cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace depo::envs
