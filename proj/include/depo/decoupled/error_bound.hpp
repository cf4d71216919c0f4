#pragma once

// Compounding-error bound check:
//   ||s' - s'_E|| <= L C ||h_E(s) - h_psi(s)|| + L ||I_B(s, s-hat') - I_phi(s, s-hat')||
// where s' is the state reached by the decoupled policy, s'_E the expert's next state,
// L a Lipschitz constant of the dynamics in the action and C one of the true inverse
// dynamics I_B in the target state.

#include "depo/decoupled/continuous.hpp"
#include "depo/decoupled/tabular.hpp"
#include "depo/envs/demonstrations.hpp"
#include "depo/envs/gridworld.hpp"
#include "depo/envs/pointmass.hpp"
#include "depo/random.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace depo::decoupled {

struct ErrorBoundReport {
  std::vector<double> observed_gap;
  std::vector<double> planner_term;
  std::vector<double> invdyn_term;
  double lipschitz_L = 0.0;
  double lipschitz_C = 0.0;

  std::size_t size() const { return observed_gap.size(); }
  std::size_t violations(double slack = 1e-9) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i)
      if (observed_gap[i] > planner_term[i] + invdyn_term[i] + slack) ++n;
    return n;
  }
  /// min over states of bound - gap.
  double worst_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i) m = std::min(m, planner_term[i] + invdyn_term[i] - observed_gap[i]);
    return m;
  }
  bool holds(double slack = 1e-9) const { return violations(slack) == 0; }
};

// ---- point mass ------------------------------------------------------------

/// Max difference quotients over `pairs` perturbation pairs, half along coordinate axes and
/// half along random directions, at states drawn by `sample_state`.
template <class SampleState>
std::pair<double, double> estimate_pointmass_lipschitz(const envs::PointMass& env, SampleState&& sample_state, Rng& rng,
                                                       std::size_t pairs = 10000) {
  const auto adim = env.action_dim();
  const auto sdim = env.state_dim();
  double L = 0.0, C = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Vector s = sample_state(rng);
    const bool axis = i % 2 == 0;
    Vector a1(adim), da(adim);
    for (Eigen::Index j = 0; j < adim; ++j) a1(j) = uniform(rng, -1.0, 1.0);
    if (axis) {
      da.setZero();
      da(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(adim)))) = uniform(rng, -0.05, 0.05);
    } else {
      for (Eigen::Index j = 0; j < adim; ++j) da(j) = uniform(rng, -0.5, 0.5);
    }
    if (da.norm() > 0.0) L = std::max(L, (env.step(s, a1 + da) - env.step(s, a1)).norm() / da.norm());

    const Vector n1 = env.step(s, a1);
    Vector dn(sdim);
    if (axis) {
      dn.setZero();
      dn(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(sdim)))) = uniform(rng, -0.01, 0.01);
    } else {
      for (Eigen::Index j = 0; j < sdim; ++j) dn(j) = uniform(rng, -0.05, 0.05);
    }
    if (dn.norm() > 0.0)
      C = std::max(C, (env.true_inverse_dynamics(s, n1 + dn) - env.true_inverse_dynamics(s, n1)).norm() / dn.norm());
  }
  return {L, C};
}

/// Evaluates the bound at each column of `states` for the deterministic decoupled policy
/// against the expert controller, with L and C supplied by the caller.
inline ErrorBoundReport theorem2_report(const ContinuousDecoupledPolicy& policy, const envs::PointMass& env,
                                        const envs::Controller& expert, const Matrix& states, double L, double C) {
  if (env.config().transform == envs::ActionTransform::complex_double)
    throw PreconditionError("bound check needs closed-form inverse dynamics");
  ErrorBoundReport r;
  r.lipschitz_L = L;
  r.lipschitz_C = C;
  const Matrix plans = policy.plan_mean(states);
  const Matrix actions = policy.inverse_mean(states, plans);
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const Vector s = states.col(j);
    const Vector expert_next = env.step(s, expert(s));
    const Vector reached = env.step(s, actions.col(j));
    r.observed_gap.push_back((reached - expert_next).norm());
    r.planner_term.push_back(L * C * (expert_next - plans.col(j)).norm());
    r.invdyn_term.push_back(L * (env.true_inverse_dynamics(s, plans.col(j)) - actions.col(j)).norm());
  }
  return r;
}

// ---- grid world ------------------------------------------------------------

/// True inverse dynamics on the grid: the smallest action whose successor is nearest to `target`
/// (exact for reachable targets).
inline int grid_true_inverse(const envs::GridWorld& gw, int s, int target) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < gw.n_actions(); ++a) {
    const double d = (gw.coords(gw.next_state(s, a)) - gw.coords(target)).norm();
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

/// Exhaustive constants with the discrete metric on actions and Euclidean cell distance on states.
inline std::pair<double, double> grid_lipschitz(const envs::GridWorld& gw) {
  double L = 0.0, C = 0.0;
  for (int s = 0; s < gw.n_states(); ++s) {
    for (int a = 0; a < gw.n_actions(); ++a)
      for (int b = 0; b < gw.n_actions(); ++b)
        if (a != b) L = std::max(L, (gw.coords(gw.next_state(s, a)) - gw.coords(gw.next_state(s, b))).norm());
    for (int t1 = 0; t1 < gw.n_states(); ++t1)
      for (int t2 = t1 + 1; t2 < gw.n_states(); ++t2) {
        const double d = grid_true_inverse(gw, s, t1) != grid_true_inverse(gw, s, t2) ? 1.0 : 0.0;
        C = std::max(C, d / (gw.coords(t1) - gw.coords(t2)).norm());
      }
  }
  return {L, C};
}

/// Bound at the given states for deterministic planner/inverse tables against the grid expert.
inline ErrorBoundReport theorem2_report(const Matrix& planner, const InverseTable& inverse, const envs::GridWorld& gw,
                                        const std::vector<int>& states, double L, double C) {
  ErrorBoundReport r;
  r.lipschitz_L = L;
  r.lipschitz_C = C;
  const auto expert = gw.expert_policy();
  for (int s : states) {
    Eigen::Index ea = 0;
    expert.probs().row(s).maxCoeff(&ea);
    const int expert_next = gw.next_state(s, static_cast<int>(ea));
    const auto choice = act_deterministic(planner, inverse, s);
    const int reached = gw.next_state(s, choice.action);
    r.observed_gap.push_back((gw.coords(reached) - gw.coords(expert_next)).norm());
    r.planner_term.push_back(L * C * (gw.coords(expert_next) - gw.coords(choice.planned)).norm());
    r.invdyn_term.push_back(L * (grid_true_inverse(gw, s, choice.planned) != choice.action ? 1.0 : 0.0));
  }
  return r;
}

}  // namespace depo::decoupled
