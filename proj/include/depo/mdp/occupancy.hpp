#pragma once

#include "depo/mdp/finite_mdp.hpp"

#include <Eigen/LU>

#include <optional>
#include <vector>

namespace depo::mdp {

/// Unnormalized discounted occupancies; each sums to 1/(1-gamma).
struct OccupancyMeasures {
  Vector state_om;         // rho(s)
  Matrix state_action_om;  // rho(s,a)
  Matrix transition_om;    // rho(s,s')
};

/// Row-stochastic planner table h[s][s']. Rows of unvisited states are undefined
/// (defined[s] == false) and hold zeros.
struct PlannerTable {
  Matrix probs;
  std::vector<bool> defined;

  bool is_defined(std::size_t s) const { return defined.at(s); }
};

/// rho(s) = sum_t gamma^t P(s_t = s), by LU solve of (I - gamma P_pi^T) rho = rho0.
inline Vector state_occupancy(const FiniteMDP& mdp, const TabularPolicy& policy) {
  const Matrix P = state_transition_matrix(mdp, policy);
  const auto S = P.rows();
  const Matrix system = Matrix::Identity(S, S) - mdp.discount() * P.transpose();
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector rho = lu.solve(mdp.initial());
  if (!rho.allFinite()) throw NumericalError("occupancy system is singular");
  return rho;
}

inline OccupancyMeasures occupancy_measures(const FiniteMDP& mdp, const TabularPolicy& policy) {
  OccupancyMeasures om;
  om.state_om = state_occupancy(mdp, policy);
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  om.state_action_om = policy.probs().array().colwise() * om.state_om.array();
  om.transition_om = Matrix::Zero(S, S);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index a = 0; a < A; ++a) {
      const double w = om.state_action_om(s, a);
      if (w != 0.0) om.transition_om.row(s) += w * mdp.transition().row(s * A + a);
    }
  return om;
}

/// h[s][s'] = sum_a pi(a|s) T[s][a][s']; defined everywhere.
inline PlannerTable marginal_planner(const FiniteMDP& mdp, const TabularPolicy& policy) {
  PlannerTable table;
  table.probs = state_transition_matrix(mdp, policy);
  table.defined.assign(mdp.n_states(), true);
  return table;
}

/// h[s][s'] = rho(s,s') / sum_s~ rho(s,s~) on states with positive visitation.
inline PlannerTable planner_from_occupancy(const OccupancyMeasures& om) {
  const auto S = om.transition_om.rows();
  PlannerTable table;
  table.probs = Matrix::Zero(S, om.transition_om.cols());
  table.defined.assign(static_cast<std::size_t>(S), false);
  for (Eigen::Index s = 0; s < S; ++s) {
    const double mass = om.transition_om.row(s).sum();
    if (mass > 0.0) {
      table.probs.row(s) = om.transition_om.row(s) / mass;
      table.defined[static_cast<std::size_t>(s)] = true;
    }
  }
  return table;
}

/// V^pi(s) = E[sum_t gamma^t r(s_t, s_{t+1})] for a state-only reward r(s,s').
inline Vector evaluate_policy(const FiniteMDP& mdp, const TabularPolicy& policy) {
  if (!mdp.reward()) throw PreconditionError("policy evaluation needs a state-only reward r(s,s')");
  const Matrix P = state_transition_matrix(mdp, policy);
  const Vector expected_reward = (P.array() * mdp.reward()->array()).rowwise().sum();
  const auto S = P.rows();
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(S, S) - mdp.discount() * P);
  return lu.solve(expected_reward);
}

/// Q^pi(s,a) = sum_s' T[s][a][s'] (r(s,s') + gamma V^pi(s')), laid out S x A.
inline Matrix evaluate_q(const FiniteMDP& mdp, const TabularPolicy& policy) {
  const Vector V = evaluate_policy(mdp, policy);
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  Matrix Q(S, A);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index a = 0; a < A; ++a) {
      const auto row = mdp.transition().row(s * A + a);
      Q(s, a) = (row.transpose().array() * (mdp.reward()->row(s).transpose().array() + mdp.discount() * V.array())).sum();
    }
  return Q;
}

}  // namespace depo::mdp
