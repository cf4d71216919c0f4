#pragma once

#include "depo/mdp/finite_mdp.hpp"
#include "depo/random.hpp"

namespace depo::mdp {

/// Dirichlet(1)-style random rows: exponential draws normalized.
inline Eigen::RowVectorXd random_distribution(Rng& rng, Eigen::Index n) {
  Eigen::RowVectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) row(i) = -std::log(1.0 - uniform01(rng));
  return row / row.sum();
}

/// Random stochastic MDP with a random initial distribution and a random state-only reward.
inline FiniteMDP random_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions, double discount) {
  Rng rng(seed);
  const auto S = static_cast<Eigen::Index>(n_states);
  const auto A = static_cast<Eigen::Index>(n_actions);
  Matrix T(S * A, S);
  for (Eigen::Index r = 0; r < S * A; ++r) T.row(r) = random_distribution(rng, S);
  Vector rho0 = random_distribution(rng, S).transpose();
  Matrix R(S, S);
  for (Eigen::Index i = 0; i < S; ++i)
    for (Eigen::Index j = 0; j < S; ++j) R(i, j) = uniform(rng, -1.0, 1.0);
  return FiniteMDP(n_states, n_actions, std::move(T), std::move(rho0), discount, std::move(R));
}

inline TabularPolicy random_policy(std::uint64_t seed, std::size_t n_states, std::size_t n_actions) {
  Rng rng(seed);
  Matrix P(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
  for (Eigen::Index s = 0; s < P.rows(); ++s) P.row(s) = random_distribution(rng, P.cols());
  return TabularPolicy(std::move(P));
}

/// Copies `mdp` and overwrites action `duplicate` with action `source` at `state`.
inline FiniteMDP plant_duplicate_action(const FiniteMDP& mdp, std::size_t state, std::size_t source, std::size_t duplicate) {
  Matrix T = mdp.transition();
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  const auto s = static_cast<Eigen::Index>(state);
  T.row(s * A + static_cast<Eigen::Index>(duplicate)) = T.row(s * A + static_cast<Eigen::Index>(source));
  return FiniteMDP(mdp.n_states(), mdp.n_actions(), std::move(T), mdp.initial(), mdp.discount(), mdp.reward());
}

}  // namespace depo::mdp
