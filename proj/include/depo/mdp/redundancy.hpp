#pragma once

#include "depo/mdp/finite_mdp.hpp"
#include "depo/mdp/occupancy.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace depo::mdp {

/// Residual threshold for accepting a convex-combination witness.
inline constexpr double kWitnessTolerance = 1e-9;

/// Lawson-Hanson active-set solver for min ||E x - f|| subject to x >= 0.
inline Vector nonnegative_least_squares(const Matrix& E, const Vector& f, int max_iterations = 500) {
  const auto n = E.cols();
  Vector x = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-14 * std::max<double>(1.0, static_cast<double>(n)) * std::max(1.0, E.cwiseAbs().maxCoeff());

  auto solve_passive = [&](Vector& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Matrix sub(E.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = E.col(idx[k]);
    const Vector zp = sub.colPivHouseholderQr().solve(f);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
  };

  for (int outer = 0; outer < max_iterations; ++outer) {
    Vector w = E.transpose() * (f - E * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < max_iterations; ++inner) {
      Vector z;
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
      if (feasible) {
        x = z;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - z(j)));
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
    }
  }
  return x;
}

/// A state s_m, an action a_n and a distribution p over the other actions with
/// sum_a p(a) T[s_m][a][.] == T[s_m][a_n][.].
struct RedundancyWitness {
  std::size_t state = 0;
  std::size_t action = 0;
  Vector mixture;  // length n_actions, mixture(action) == 0
};

inline double witness_residual(const FiniteMDP& mdp, const RedundancyWitness& w) {
  Eigen::RowVectorXd combo = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(mdp.n_states()));
  for (std::size_t a = 0; a < mdp.n_actions(); ++a) combo += w.mixture(static_cast<Eigen::Index>(a)) * mdp.row(w.state, a);
  return (combo - mdp.row(w.state, w.action)).cwiseAbs().maxCoeff();
}

inline bool is_valid_witness(const FiniteMDP& mdp, const RedundancyWitness& w) {
  if (w.state >= mdp.n_states() || w.action >= mdp.n_actions()) return false;
  if (w.mixture.size() != static_cast<Eigen::Index>(mdp.n_actions())) return false;
  if (w.mixture(static_cast<Eigen::Index>(w.action)) != 0.0) return false;
  if ((w.mixture.array() < 0.0).any() || std::abs(w.mixture.sum() - 1.0) > kWitnessTolerance) return false;
  return witness_residual(mdp, w) <= kWitnessTolerance;
}

/// Is T[s][action] a convex combination of the other actions' rows at s?
inline std::optional<RedundancyWitness> redundancy_witness_at(const FiniteMDP& mdp, std::size_t s, std::size_t action) {
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  if (A < 2) return std::nullopt;
  Matrix E(S, A - 1);
  std::vector<std::size_t> others;
  for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
    if (a == action) continue;
    E.col(static_cast<Eigen::Index>(others.size())) = mdp.row(s, a).transpose();
    others.push_back(a);
  }
  const Vector target = mdp.row(s, action).transpose();
  const Vector p = nonnegative_least_squares(E, target);
  const double mass = p.sum();
  if (mass <= 0.0) return std::nullopt;
  RedundancyWitness w{s, action, Vector::Zero(A)};
  // Rows of T sum to one, so an exact fit already has unit mass; renormalizing only removes round-off.
  for (std::size_t k = 0; k < others.size(); ++k) w.mixture(static_cast<Eigen::Index>(others[k])) = p(static_cast<Eigen::Index>(k)) / mass;
  if (witness_residual(mdp, w) > kWitnessTolerance) return std::nullopt;
  return w;
}

inline std::optional<RedundancyWitness> redundancy_witness_at_state(const FiniteMDP& mdp, std::size_t s) {
  for (std::size_t a = 0; a < mdp.n_actions(); ++a)
    if (auto w = redundancy_witness_at(mdp, s, a)) return w;
  return std::nullopt;
}

/// First witness in (state, action) lexicographic order, if any.
inline std::optional<RedundancyWitness> find_redundancy_witness(const FiniteMDP& mdp) {
  for (std::size_t s = 0; s < mdp.n_states(); ++s)
    if (auto w = redundancy_witness_at_state(mdp, s)) return w;
  return std::nullopt;
}

/// The two policies of the many-to-one construction: pi0 plays a_n at s_m, pi1 plays the
/// mixture p at s_m; elsewhere both copy `base`.
inline std::pair<TabularPolicy, TabularPolicy> counterexample_policies(const FiniteMDP& mdp, const RedundancyWitness& w,
                                                                       const TabularPolicy& base) {
  check_shapes(mdp, base);
  if (!is_valid_witness(mdp, w)) throw PreconditionError("redundancy witness is not valid for this MDP");
  Matrix p0 = base.probs();
  Matrix p1 = base.probs();
  const auto sm = static_cast<Eigen::Index>(w.state);
  p0.row(sm).setZero();
  p0(sm, static_cast<Eigen::Index>(w.action)) = 1.0;
  p1.row(sm) = w.mixture.transpose();
  return {TabularPolicy(std::move(p0)), TabularPolicy(std::move(p1))};
}

/// Groups actions at s by their (unique) successor state. Groups are ordered by their smallest action.
inline std::vector<std::vector<std::size_t>> same_next_state_action_set(const FiniteMDP& mdp, std::size_t s) {
  if (s >= mdp.n_states()) throw DimensionError("state index out of range");
  std::map<std::size_t, std::size_t> group_of_successor;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
    Eigen::Index next = 0;
    const double top = mdp.row(s, a).maxCoeff(&next);
    if (std::abs(top - 1.0) > kProbabilityTolerance)
      throw PreconditionError("transition at state " + std::to_string(s) + ", action " + std::to_string(a) +
                              " is not deterministic");
    const auto key = static_cast<std::size_t>(next);
    auto it = group_of_successor.find(key);
    if (it == group_of_successor.end()) {
      group_of_successor.emplace(key, groups.size());
      groups.push_back({a});
    } else {
      groups[it->second].push_back(a);
    }
  }
  return groups;
}

struct DominanceReport {
  std::vector<double> margins;  // one per column (s'', s), pair index s''*S + s
  double min_margin = 0.0;
  bool all_positive = false;
};

/// The pair-indexed system matrix of the transition-occupancy recursion:
/// A[(s,s'),(s'',s~)] = [(s,s') == (s'',s~)] - gamma * P(s'|s) [s~ == s].
inline Matrix transition_recursion_matrix(const FiniteMDP& mdp, const TabularPolicy& policy) {
  const Matrix P = state_transition_matrix(mdp, policy);
  const auto S = P.rows();
  Matrix A = Matrix::Identity(S * S, S * S);
  const double g = mdp.discount();
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index sn = 0; sn < S; ++sn) {
      const double v = g * P(s, sn);
      if (v == 0.0) continue;
      for (Eigen::Index spp = 0; spp < S; ++spp) A(s * S + sn, spp * S + s) -= v;
    }
  return A;
}

inline DominanceReport verify_column_dominance(const FiniteMDP& mdp, const TabularPolicy& policy) {
  const Matrix A = transition_recursion_matrix(mdp, policy);
  DominanceReport report;
  report.margins.resize(static_cast<std::size_t>(A.cols()));
  report.min_margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < A.cols(); ++c) {
    const double diag = std::abs(A(c, c));
    const double off = A.col(c).cwiseAbs().sum() - diag;
    report.margins[static_cast<std::size_t>(c)] = diag - off;
    report.min_margin = std::min(report.min_margin, diag - off);
  }
  report.all_positive = report.min_margin > 0.0;
  return report;
}

struct RedistributionReport {
  Vector value_original;
  Vector value_replaced;
  double max_value_difference = 0.0;
  std::vector<std::size_t> action_group;
};

/// Replaces policy(.|s_hat) by `replacement`, both supported on one same-successor action group,
/// and compares the exact value functions under the state-only reward.
inline RedistributionReport verify_theorem1(const FiniteMDP& mdp, const TabularPolicy& policy, std::size_t s_hat,
                                      const Vector& replacement) {
  check_shapes(mdp, policy);
  if (!mdp.reward()) throw PreconditionError("theorem check needs a state-only reward r(s,s')");
  if (replacement.size() != static_cast<Eigen::Index>(mdp.n_actions()))
    throw DimensionError("replacement distribution length differs from n_actions");
  const auto groups = same_next_state_action_set(mdp, s_hat);
  const auto row = static_cast<Eigen::Index>(s_hat);

  auto group_containing_support = [&](auto&& dist) -> std::optional<std::size_t> {
    std::optional<std::size_t> found;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      double mass = 0.0;
      for (auto a : groups[g]) mass += dist(static_cast<Eigen::Index>(a));
      if (mass > 0.0) {
        if (found) return std::nullopt;
        found = g;
      }
    }
    return found;
  };

  const Eigen::VectorXd original_row = policy.probs().row(row).transpose();
  const auto g_policy = group_containing_support(original_row);
  if (!g_policy) throw PreconditionError("policy support at s_hat spans more than one successor group");
  const auto g_replacement = group_containing_support(replacement);
  if (!g_replacement || *g_replacement != *g_policy)
    throw PreconditionError("replacement support lies outside the policy's action group at s_hat");

  Matrix replaced = policy.probs();
  replaced.row(row) = replacement.transpose();
  const TabularPolicy other(std::move(replaced));

  RedistributionReport report;
  report.action_group = groups[*g_policy];
  report.value_original = evaluate_policy(mdp, policy);
  report.value_replaced = evaluate_policy(mdp, other);
  report.max_value_difference = (report.value_original - report.value_replaced).cwiseAbs().maxCoeff();
  return report;
}

}  // namespace depo::mdp
