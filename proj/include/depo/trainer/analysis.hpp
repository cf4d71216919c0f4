#pragma once

// Planner inspection: imagined rollouts, grid argmax maps and one-step prediction error.

#include "depo/decoupled/continuous.hpp"
#include "depo/decoupled/tabular.hpp"
#include "depo/envs/gridworld.hpp"
#include "depo/envs/pointmass.hpp"
#include "depo/trainer/agent_common.hpp"

#include <algorithm>
#include <vector>

namespace depo::trainer {

/// n + 1 states: s0 followed by n argmax predictions, each fed back into the planner table.
inline std::vector<int> multi_step_rollout(const Matrix& planner_table, int s0, int n) {
  if (n < 0) throw PreconditionError("rollout length must be nonnegative");
  if (s0 < 0 || s0 >= planner_table.rows()) throw PreconditionError("start state out of range");
  std::vector<int> out{s0};
  int s = s0;
  for (int t = 0; t < n; ++t) {
    Eigen::Index k = 0;
    planner_table.row(s).maxCoeff(&k);
    s = static_cast<int>(k);
    out.push_back(s);
  }
  return out;
}

/// n + 1 states from iterating the planner mean.
inline std::vector<Vector> multi_step_rollout(const decoupled::ContinuousDecoupledPolicy& policy, const Vector& s0, int n) {
  if (n < 0) throw PreconditionError("rollout length must be nonnegative");
  std::vector<Vector> out{s0};
  Matrix s = s0;
  for (int t = 0; t < n; ++t) {
    s = policy.plan_mean(s);
    out.push_back(s.col(0));
  }
  return out;
}

/// Real trajectory of the deterministic decoupled policy, n + 1 states.
inline std::vector<Vector> policy_rollout(const decoupled::ContinuousDecoupledPolicy& policy, const envs::PointMass& env,
                                          const Vector& s0, int n) {
  std::vector<Vector> out{s0};
  Vector s = s0;
  for (int t = 0; t < n; ++t) {
    s = env.step(s, decoupled::act_deterministic(policy, s).action.cwiseMax(-1.0).cwiseMin(1.0));
    out.push_back(s);
  }
  return out;
}

/// Argmax successor of every state and its classification.
struct PlannerMap {
  std::vector<int> argmax;
  std::vector<bool> legal;    // neighbor or self
  std::vector<bool> on_path;  // successor lies on the expert path

  /// Share of illegal predictions among non-goal states.
  double illegal_fraction(const envs::GridWorld& gw) const {
    int bad = 0, n = 0;
    for (int s = 0; s < gw.n_states(); ++s) {
      if (s == gw.goal()) continue;
      ++n;
      bad += legal[static_cast<std::size_t>(s)] ? 0 : 1;
    }
    return static_cast<double>(bad) / n;
  }

  /// Among non-goal states off the expert path, share whose prediction lands on the path.
  double off_path_to_path_fraction(const envs::GridWorld& gw) const {
    const auto path = gw.expert_path_states();
    int hit = 0, n = 0;
    for (int s = 0; s < gw.n_states(); ++s) {
      if (s == gw.goal() || std::find(path.begin(), path.end(), s) != path.end()) continue;
      ++n;
      hit += on_path[static_cast<std::size_t>(s)] ? 1 : 0;
    }
    return n ? static_cast<double>(hit) / n : 1.0;
  }
};

inline PlannerMap planner_map(const envs::GridWorld& gw, const Matrix& planner_table) {
  if (planner_table.rows() != gw.n_states() || planner_table.cols() != gw.n_states())
    throw DimensionError("planner table must be states x states");
  const auto path = gw.expert_path_states();
  PlannerMap m;
  for (int s = 0; s < gw.n_states(); ++s) {
    Eigen::Index k = 0;
    planner_table.row(s).maxCoeff(&k);
    const int n = static_cast<int>(k);
    m.argmax.push_back(n);
    m.legal.push_back(gw.is_legal_successor(s, n));
    m.on_path.push_back(std::find(path.begin(), path.end(), n) != path.end());
  }
  return m;
}

/// Mean of ||planned - reached||^2 over recorded transitions.
inline double planner_mse(const std::vector<Vector>& planned, const std::vector<Vector>& reached) {
  if (planned.empty()) throw PreconditionError("no evaluation transitions");
  if (planned.size() != reached.size()) throw DimensionError("planned and reached counts differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < planned.size(); ++i) sum += (planned[i] - reached[i]).squaredNorm();
  return sum / static_cast<double>(planned.size());
}

}  // namespace depo::trainer
