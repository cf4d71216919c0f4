#pragma once

#include "depo/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace depo::mdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kProbabilityTolerance = 1e-12;

/// Tabular MDP. The transition tensor T[s][a][s'] is stored as an (S*A) x S matrix
/// whose row s*A + a is the distribution over successors.
class FiniteMDP {
 public:
  FiniteMDP(std::size_t n_states, std::size_t n_actions, Matrix transition, Vector initial,
            double discount, std::optional<Matrix> reward = std::nullopt)
      : n_states_(n_states),
        n_actions_(n_actions),
        transition_(std::move(transition)),
        initial_(std::move(initial)),
        discount_(discount),
        reward_(std::move(reward)) {
    validate();
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double discount() const { return discount_; }
  const Vector& initial() const { return initial_; }
  const Matrix& transition() const { return transition_; }
  const std::optional<Matrix>& reward() const { return reward_; }

  /// T[s][a][.] as a row expression.
  auto row(std::size_t s, std::size_t a) const {
    return transition_.row(static_cast<Eigen::Index>(s * n_actions_ + a));
  }
  double prob(std::size_t s, std::size_t a, std::size_t next) const {
    return transition_(static_cast<Eigen::Index>(s * n_actions_ + a), static_cast<Eigen::Index>(next));
  }

 private:
  void validate() const {
    const auto S = static_cast<Eigen::Index>(n_states_);
    const auto A = static_cast<Eigen::Index>(n_actions_);
    if (n_states_ == 0 || n_actions_ == 0) throw InvariantError("MDP needs at least one state and one action");
    if (transition_.rows() != S * A || transition_.cols() != S) {
      std::ostringstream msg;
      msg << "transition has shape " << transition_.rows() << "x" << transition_.cols() << ", expected "
          << S * A << "x" << S;
      throw DimensionError(msg.str());
    }
    if (initial_.size() != S) throw DimensionError("initial distribution length differs from n_states");
    for (Eigen::Index s = 0; s < S; ++s) {
      for (Eigen::Index a = 0; a < A; ++a) {
        const auto r = transition_.row(s * A + a);
        for (Eigen::Index t = 0; t < S; ++t) {
          if (!(r(t) >= 0.0) || !std::isfinite(r(t))) {
            std::ostringstream msg;
            msg << "transition[" << s << "][" << a << "][" << t << "] = " << r(t) << " is not a probability";
            throw InvariantError(msg.str());
          }
        }
        if (std::abs(r.sum() - 1.0) > kProbabilityTolerance) {
          std::ostringstream msg;
          msg << "transition[" << s << "][" << a << "] sums to " << r.sum() << ", expected 1";
          throw InvariantError(msg.str());
        }
      }
    }
    for (Eigen::Index s = 0; s < S; ++s) {
      if (!(initial_(s) >= 0.0) || !std::isfinite(initial_(s))) {
        std::ostringstream msg;
        msg << "initial[" << s << "] = " << initial_(s) << " is not a probability";
        throw InvariantError(msg.str());
      }
    }
    if (std::abs(initial_.sum() - 1.0) > kProbabilityTolerance)
      throw InvariantError("initial distribution sums to " + std::to_string(initial_.sum()) + ", expected 1");
    if (!(discount_ >= 0.0 && discount_ < 1.0))
      throw InvariantError("discount must lie in [0, 1), got " + std::to_string(discount_));
    if (reward_) {
      if (reward_->rows() != S || reward_->cols() != S) throw DimensionError("reward must be n_states x n_states");
      if (!reward_->allFinite()) throw InvariantError("reward has non-finite entries");
    }
  }

  std::size_t n_states_;
  std::size_t n_actions_;
  Matrix transition_;
  Vector initial_;
  double discount_;
  std::optional<Matrix> reward_;
};

/// pi[s][a]; rows are distributions.
class TabularPolicy {
 public:
  explicit TabularPolicy(Matrix probs) : probs_(std::move(probs)) {
    for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
      for (Eigen::Index a = 0; a < probs_.cols(); ++a) {
        if (!(probs_(s, a) >= 0.0) || !std::isfinite(probs_(s, a))) {
          std::ostringstream msg;
          msg << "policy[" << s << "][" << a << "] = " << probs_(s, a) << " is not a probability";
          throw InvariantError(msg.str());
        }
      }
      if (std::abs(probs_.row(s).sum() - 1.0) > kProbabilityTolerance)
        throw InvariantError("policy row " + std::to_string(s) + " does not sum to 1");
    }
  }

  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions) {
    return TabularPolicy(Matrix::Constant(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions),
                                          1.0 / static_cast<double>(n_actions)));
  }

  const Matrix& probs() const { return probs_; }
  std::size_t n_states() const { return static_cast<std::size_t>(probs_.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(probs_.cols()); }
  double operator()(std::size_t s, std::size_t a) const {
    return probs_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
  }

 private:
  Matrix probs_;
};

inline void check_shapes(const FiniteMDP& mdp, const TabularPolicy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    std::ostringstream msg;
    msg << "policy is " << policy.n_states() << "x" << policy.n_actions() << " but MDP has " << mdp.n_states()
        << " states and " << mdp.n_actions() << " actions";
    throw DimensionError(msg.str());
  }
}

/// P_pi[s][s'] = sum_a pi(a|s) T[s][a][s'].
inline Matrix state_transition_matrix(const FiniteMDP& mdp, const TabularPolicy& policy) {
  check_shapes(mdp, policy);
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  Matrix P = Matrix::Zero(S, S);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index a = 0; a < A; ++a) {
      const double w = policy.probs()(s, a);
      if (w != 0.0) P.row(s) += w * mdp.transition().row(s * A + a);
    }
  return P;
}

}  // namespace depo::mdp
