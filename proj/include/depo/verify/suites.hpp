#pragma once

// Property suites over fixed seed sets. Each check reports its worst residual against a pinned tolerance.

#include "depo/adversarial/discriminator.hpp"
#include "depo/approx/gradcheck.hpp"
#include "depo/decoupled/continuous.hpp"
#include "depo/decoupled/qfunction.hpp"
#include "depo/decoupled/tabular.hpp"
#include "depo/decoupled/error_bound.hpp"
#include "depo/envs/gridworld.hpp"
#include "depo/envs/pointmass.hpp"
#include "depo/mdp/occupancy.hpp"
#include "depo/mdp/random_mdp.hpp"
#include "depo/mdp/redundancy.hpp"
#include "depo/trainer/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace depo::verify {

using approx::Matrix;
using approx::ParamVector;
using approx::Vector;

struct Check {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // worst residual seen
  double tolerance = 0.0;  // pass threshold on `worst`
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  double worst() const {
    double w = 0.0;
    for (const auto& c : checks) w = std::max(w, c.worst);
    return w;
  }
};

/// worst <= tolerance.
inline Check bounded(std::string name, double worst, double tolerance, std::string detail = {}) {
  return {std::move(name), worst <= tolerance, worst, tolerance, std::move(detail)};
}

inline std::string format_check(const Check& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "[%s] %-44s worst=%.3e tol=%.1e", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.worst,
                c.tolerance);
  std::string out = buf;
  if (!c.detail.empty()) out += "  " + c.detail;
  return out;
}

// ---- occupancy --------------------------------------------------------------------------------

/// Marginal planner vs planner recovered from the occupancy measure on 20 random MDPs.
inline SuiteReport occupancy_suite() {
  SuiteReport r{"occupancy", {}};
  double bij = 0.0, norm = 0.0;
  int visited = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t S = 2 + seed % 9, A = 1 + seed % 5;
    const auto mdp = mdp::random_mdp(1000 + seed, S, A, 0.99);
    const auto pi = mdp::random_policy(2000 + seed, S, A);
    const auto om = mdp::occupancy_measures(mdp, pi);
    const auto a = mdp::marginal_planner(mdp, pi);
    const auto b = mdp::planner_from_occupancy(om);
    for (std::size_t s = 0; s < S; ++s) {
      if (!b.is_defined(s)) continue;
      ++visited;
      const auto i = static_cast<Eigen::Index>(s);
      bij = std::max(bij, (a.probs.row(i) - b.probs.row(i)).cwiseAbs().maxCoeff());
    }
    norm = std::max(norm, std::abs(om.state_om.sum() - 1.0 / (1.0 - mdp.discount())) * (1.0 - mdp.discount()));
  }
  r.checks.push_back(bounded("planner bijection, 20 random MDPs", bij, 1e-9, std::to_string(visited) + " visited states"));
  r.checks.push_back(bounded("occupancy mass (1-gamma) sum rho = 1", norm, 1e-9));
  return r;
}

// ---- redundancy counterexample and column dominance ---------------------------------------------

/// Two policies from a redundancy witness: distinct at s_m, equal transition occupancy.
inline void counterexample_checks(const mdp::FiniteMDP& mdp, const mdp::TabularPolicy& base, double& om_gap, double& min_linf,
                                  bool& found) {
  const auto w = mdp::find_redundancy_witness(mdp);
  if (!w) {
    found = false;
    return;
  }
  const auto [pi0, pi1] = mdp::counterexample_policies(mdp, *w, base);
  const auto sm = static_cast<Eigen::Index>(w->state);
  min_linf = std::min(min_linf, (pi0.probs().row(sm) - pi1.probs().row(sm)).cwiseAbs().maxCoeff());
  const auto om0 = mdp::occupancy_measures(mdp, pi0);
  const auto om1 = mdp::occupancy_measures(mdp, pi1);
  om_gap = std::max(om_gap, (om0.transition_om - om1.transition_om).cwiseAbs().maxCoeff());
}

inline SuiteReport redundancy_suite() {
  SuiteReport r{"redundancy", {}};
  double om_gap = 0.0, min_linf = std::numeric_limits<double>::infinity();
  bool all_found = true;
  {
    envs::GridConfig gc;
    gc.k = 2;
    const envs::GridWorld gw(gc);
    const auto mdp = gw.to_finite_mdp(0.99);
    bool found = true;
    counterexample_checks(mdp, mdp::TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()), om_gap, min_linf, found);
    all_found = all_found && found;
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t S = 3 + seed, A = 3;
    const auto mdp = mdp::plant_duplicate_action(mdp::random_mdp(3000 + seed, S, A, 0.99), seed % S, 1, 2);
    bool found = true;
    counterexample_checks(mdp, mdp::random_policy(3100 + seed, S, A), om_gap, min_linf, found);
    all_found = all_found && found;
  }
  r.checks.push_back({"witness found (grid k=2, 5 planted MDPs)", all_found, all_found ? 0.0 : 1.0, 0.0, {}});
  r.checks.push_back(bounded("counterexample transition OM gap", om_gap, 1e-9));
  // Distinctness: 0.5 - L_inf must be <= 0.
  r.checks.push_back(bounded("policy distance 0.5 - Linf at s_m", 0.5 - min_linf, 0.0, "min Linf " + std::to_string(min_linf)));
  return r;
}

inline SuiteReport dominance_suite() {
  SuiteReport r = redundancy_suite();
  r.suite = "dominance";
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t S = 1 + seed % 7, A = 1 + seed % 4;
    const auto mdp = mdp::random_mdp(4000 + seed, S, A, 0.99);
    const auto rep = mdp::verify_column_dominance(mdp, mdp::random_policy(4100 + seed, S, A));
    // Margin must reach (1 - gamma); residual is the shortfall.
    worst = std::max(worst, (1.0 - mdp.discount()) - rep.min_margin);
  }
  r.checks.push_back(bounded("column dominance margin shortfall", std::max(worst, 0.0), 1e-12));
  return r;
}

// ---- within-group redistribution ----------------------------------------------------------------

inline SuiteReport theorem1_suite() {
  SuiteReport r{"theorem1", {}};
  for (int k : {2, 4}) {
    envs::GridConfig gc;
    gc.k = k;
    const envs::GridWorld gw(gc);
    const auto mdp = gw.to_finite_mdp(0.99);
    const auto expert = gw.expert_policy();
    Rng rng(5000 + static_cast<std::uint64_t>(k));
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const auto s = uniform_index(rng, static_cast<std::size_t>(gw.n_states()));
      Eigen::Index a0 = 0;
      expert.probs().row(static_cast<Eigen::Index>(s)).maxCoeff(&a0);
      const auto groups = mdp::same_next_state_action_set(mdp, s);
      const auto& group = *std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
        return std::find(g.begin(), g.end(), static_cast<std::size_t>(a0)) != g.end();
      });
      Vector repl = Vector::Zero(gw.n_actions());
      const auto w = mdp::random_distribution(rng, static_cast<Eigen::Index>(group.size()));
      for (std::size_t i = 0; i < group.size(); ++i) repl(static_cast<Eigen::Index>(group[i])) = w(static_cast<Eigen::Index>(i));
      worst = std::max(worst, mdp::verify_theorem1(mdp, expert, s, repl).max_value_difference);
    }
    r.checks.push_back(bounded("value change under redistribution, k=" + std::to_string(k), worst, 1e-9, "10 redistributions"));
  }
  return r;
}

// ---- gradient fidelity -------------------------------------------------------------------------

namespace detail {

inline constexpr double kFdTolerance = 1e-4;

inline decoupled::TabularDecoupledPolicy grid_policy(const envs::GridWorld& gw, std::uint64_t seed) {
  decoupled::TabularDecoupledPolicy p(gw.feature_matrix(), gw.n_actions(), {8}, {8});
  Rng rng(seed);
  p.init_planner(rng);
  p.init_inverse(rng);
  return p;
}

inline decoupled::TabularTransitionBatch grid_transitions(const envs::GridWorld& gw, Rng& rng, int n) {
  decoupled::TabularTransitionBatch b;
  for (int i = 0; i < n; ++i) {
    const int s = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(gw.n_states())));
    const int a = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(gw.n_actions())));
    b.s.push_back(s);
    b.a.push_back(a);
    b.next.push_back(gw.next_state(s, a));
  }
  return b;
}

inline decoupled::ContinuousDecoupledPolicy small_continuous(std::uint64_t seed) {
  decoupled::ContinuousPolicyShape shape;
  shape.state_dim = 4;
  shape.action_dim = 2;
  shape.planner_hidden = {8};
  shape.inverse_hidden = {8};
  shape.planner_residual_scale = 0.5;
  shape.inverse_delta_scale = 2.0;
  decoupled::ContinuousDecoupledPolicy p(shape);
  Rng rng(seed);
  p.planner().net().init(p.psi(), rng);
  p.inverse().net().init(p.phi(), rng);
  return p;
}

template <class P>
P with_psi(const P& base, const Vector& v) {
  P p = base;
  p.psi() = ParamVector(base.psi().layout(), v);
  return p;
}

template <class P>
P with_phi(const P& base, const Vector& v) {
  P p = base;
  p.phi() = ParamVector(base.phi().layout(), v);
  return p;
}

/// Worst relative FD error over `n` instances produced by `one(seed)`.
inline Check fd_check(const std::string& name, int n, const std::function<double(std::uint64_t)>& one) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) worst = std::max(worst, one(static_cast<std::uint64_t>(i)));
  return bounded(name, worst, kFdTolerance, std::to_string(n) + " instances");
}

}  // namespace detail

inline SuiteReport gradients_suite() {
  using namespace decoupled;
  using approx::check_gradient;
  using detail::fd_check;
  SuiteReport r{"gradients", {}};
  const envs::GridWorld gw;
  constexpr int N = 10;

  r.checks.push_back(fd_check("DePG tabular expected", N, [&](std::uint64_t seed) {
    const auto p = detail::grid_policy(gw, 6000 + seed);
    const auto inv = p.inverse_table();
    Rng rng(6100 + seed);
    Matrix qt(gw.n_states(), gw.n_actions());
    for (Eigen::Index i = 0; i < qt.size(); ++i) qt(i) = uniform(rng, -1.0, 2.0);
    std::vector<int> states;
    for (int i = 0; i < 6; ++i) states.push_back(static_cast<int>(uniform_index(rng, 36)));
    const Vector g = depg_gradient_expected(p, inv, states, qt);
    auto objective = [&](const Vector& v) {
      const Matrix pi = TabularDecoupledPolicy::compose(detail::with_psi(p, v).planner_table(), inv);
      double f = 0.0;
      for (int s : states) f -= pi.row(s).dot(qt.row(s));
      return f / static_cast<double>(states.size());
    };
    return check_gradient(objective, p.psi().values(), g).max_relative_error;
  }));

  r.checks.push_back(fd_check("DePG tabular sampled", N, [&](std::uint64_t seed) {
    const auto p = detail::grid_policy(gw, 6200 + seed);
    const auto inv = p.inverse_table();
    Rng rng(6300 + seed);
    const auto batch = detail::grid_transitions(gw, rng, 6);
    Vector q(6);
    for (int i = 0; i < 6; ++i) q(i) = uniform(rng, -0.02, 0.02);  // keeps Q/pi inside the clip
    const Vector g = depg_gradient(p, inv, batch, q);
    auto surrogate = [&](const Vector& v) {
      const Matrix pi = TabularDecoupledPolicy::compose(detail::with_psi(p, v).planner_table(), inv);
      double f = 0.0;
      for (std::size_t b = 0; b < batch.size(); ++b) f -= q(static_cast<Eigen::Index>(b)) * std::log(pi(batch.s[b], batch.a[b]));
      return f / static_cast<double>(batch.size());
    };
    return check_gradient(surrogate, p.psi().values(), g).max_relative_error;
  }));

  r.checks.push_back(fd_check("DePG continuous likelihood ratio", N, [&](std::uint64_t seed) {
    const Eigen::Index M = 8;
    const auto p = detail::small_continuous(6400 + seed);
    Rng rng(6500 + seed);
    const Matrix s = standard_normal(rng, 4, 3);
    const Matrix a = 0.3 * standard_normal(rng, 2, 3);
    const Matrix eps = standard_normal(rng, 4, 3 * M);
    Vector q(3);
    for (int i = 0; i < 3; ++i) q(i) = uniform(rng, -0.02, 0.02);
    const Vector pi = marginal_policy_density(p, s, a, eps, M);
    Vector w(3);
    for (int b = 0; b < 3; ++b) w(b) = importance_weight(q(b), pi(b), {});
    const Vector g = depg_gradient(p, s, a, q, eps, M);
    auto surrogate = [&](const Vector& v) {
      const Vector d = marginal_policy_density(detail::with_psi(p, v), s, a, eps, M);
      return -(w.array() * d.array()).sum() / 3.0;
    };
    return check_gradient(surrogate, p.psi().values(), g).max_relative_error;
  }));

  r.checks.push_back(fd_check("DePG continuous pathwise (psi and phi)", N, [&](std::uint64_t seed) {
    const auto p = detail::small_continuous(6600 + seed);
    TwinQ q(4, 2, {8});
    Rng rng(6700 + seed);
    q.init(rng);
    const Matrix s = standard_normal(rng, 4, 5);
    const Matrix e1 = standard_normal(rng, 4, 5);
    const Matrix e2 = 0.3 * standard_normal(rng, 2, 5);
    const double alpha = seed % 2 ? 0.2 : 0.0;
    const auto g = pathwise_policy_gradient(p, q, s, e1, e2, alpha);
    const double a = check_gradient(
                         [&](const Vector& v) { return -pathwise_policy_gradient(detail::with_psi(p, v), q, s, e1, e2, alpha).objective; },
                         p.psi().values(), g.psi)
                         .max_relative_error;
    const double b = check_gradient(
                         [&](const Vector& v) { return -pathwise_policy_gradient(detail::with_phi(p, v), q, s, e1, e2, alpha).objective; },
                         p.phi().values(), g.phi)
                         .max_relative_error;
    return std::max(a, b);
  }));

  r.checks.push_back(fd_check("CDePG tabular and continuous", N, [&](std::uint64_t seed) {
    const auto p = detail::grid_policy(gw, 6800 + seed);
    Rng rng(6900 + seed);
    const auto batch = detail::grid_transitions(gw, rng, 8);
    const TabularPairBatch pairs{batch.s, batch.next};
    Vector q(8);
    for (int i = 0; i < 8; ++i) q(i) = uniform(rng, -2.0, 2.0);
    const auto cd = cdepg_gradient(p, pairs, q);
    const double a =
        check_gradient([&](const Vector& v) { return cdepg_gradient(detail::with_psi(p, v), pairs, q).loss; }, p.psi().values(), cd.grad)
            .max_relative_error;
    const auto c = detail::small_continuous(7000 + seed);
    const Matrix s = standard_normal(rng, 4, 6);
    const Matrix next = s + 0.1 * standard_normal(rng, 4, 6);
    Vector qc(6);
    for (int i = 0; i < 6; ++i) qc(i) = uniform(rng, -2.0, 2.0);
    const auto cc = cdepg_gradient(c, s, next, qc);
    const double b =
        check_gradient([&](const Vector& v) { return cdepg_gradient(detail::with_psi(c, v), s, next, qc).loss; }, c.psi().values(), cc.grad)
            .max_relative_error;
    return std::max(a, b);
  }));

  r.checks.push_back(fd_check("supervised planner loss", N, [&](std::uint64_t seed) {
    const auto p = detail::grid_policy(gw, 7100 + seed);
    Rng rng(7200 + seed);
    const auto batch = detail::grid_transitions(gw, rng, 8);
    const TabularPairBatch pairs{batch.s, batch.next};
    const auto sup = supervised_planner_loss(p, pairs);
    const double a =
        check_gradient([&](const Vector& v) { return supervised_planner_loss(detail::with_psi(p, v), pairs).loss; }, p.psi().values(), sup.grad)
            .max_relative_error;
    const auto c = detail::small_continuous(7300 + seed);
    const Matrix s = standard_normal(rng, 4, 6);
    const Matrix next = s + 0.1 * standard_normal(rng, 4, 6);
    const auto cs = supervised_planner_loss(c, s, next);
    const double b =
        check_gradient([&](const Vector& v) { return supervised_planner_loss(detail::with_psi(c, v), s, next).loss; }, c.psi().values(), cs.grad)
            .max_relative_error;
    return std::max(a, b);
  }));

  r.checks.push_back(fd_check("inverse dynamics loss", N, [&](std::uint64_t seed) {
    const auto p = detail::grid_policy(gw, 7400 + seed);
    Rng rng(7500 + seed);
    const auto batch = detail::grid_transitions(gw, rng, 8);
    const auto lg = inverse_dynamics_loss(p, batch);
    const double a =
        check_gradient([&](const Vector& v) { return inverse_dynamics_loss(detail::with_phi(p, v), batch).loss; }, p.phi().values(), lg.grad)
            .max_relative_error;
    const auto c = detail::small_continuous(7600 + seed);
    const Matrix s = standard_normal(rng, 4, 6);
    const Matrix next = s + 0.1 * standard_normal(rng, 4, 6);
    const Matrix act = 0.5 * standard_normal(rng, 2, 6);
    const auto cl = inverse_dynamics_loss(c, s, act, next);
    const double b = check_gradient([&](const Vector& v) { return inverse_dynamics_loss(detail::with_phi(c, v), s, act, next).loss; },
                                    c.phi().values(), cl.grad)
                         .max_relative_error;
    return std::max(a, b);
  }));

  r.checks.push_back(fd_check("discriminator loss (tabular, MLP with penalty)", N, [&](std::uint64_t seed) {
    adversarial::TabularDiscriminator td(5, seed % 2 == 0);
    Rng rng(7700 + seed);
    for (Eigen::Index i = 0; i < td.params().size(); ++i) td.params().values()(i) = uniform(rng, -2.0, 2.0);
    const std::vector<int> as{0, 1, 4, 4}, an{1, 2, 3, 3}, es{2, 3, 0}, en{2, 4, 0};
    const auto tl = td.loss(as, an, es, en);
    const double a = check_gradient(
                         [&](const Vector& v) {
                           auto c = td;
                           c.params() = ParamVector(td.params().layout(), v);
                           return c.loss(as, an, es, en).total;
                         },
                         td.params().values(), tl.grad)
                         .max_relative_error;
    adversarial::MlpDiscriminator md(3, {6, 5}, seed % 2 == 0);
    md.init(rng);
    const Matrix mas = standard_normal(rng, 3, 4), man = standard_normal(rng, 3, 4);
    const Matrix mes = standard_normal(rng, 3, 5), men = standard_normal(rng, 3, 5);
    const Rng fixed(7800 + seed);
    Rng r0 = fixed;
    const auto ml = md.loss(mas, man, mes, men, 4.0, r0);
    const double b = check_gradient(
                         [&](const Vector& v) {
                           auto c = md;
                           c.params() = ParamVector(md.params().layout(), v);
                           Rng ri = fixed;
                           return c.loss(mas, man, mes, men, 4.0, ri).total;
                         },
                         md.params().values(), ml.grad)
                         .max_relative_error;
    return std::max(a, b);
  }));

  r.checks.push_back(fd_check("soft-Q TD step (tabular, twin)", N, [&](std::uint64_t seed) {
    TabularQ tq(6, 3);
    Rng rng(7900 + seed);
    for (Eigen::Index i = 0; i < tq.params().size(); ++i) tq.params().values()(i) = uniform(rng, -1.0, 1.0);
    const std::vector<int> s{0, 1, 1, 5};
    const std::vector<int> a{2, 0, 0, 1};
    Vector y(4);
    for (int i = 0; i < 4; ++i) y(i) = uniform(rng, -1.0, 2.0);
    const auto tl = tq.td_loss(s, a, y);
    const double e1 = check_gradient(
                          [&](const Vector& v) {
                            auto c = tq;
                            c.params() = ParamVector(tq.params().layout(), v);
                            return c.td_loss(s, a, y).loss;
                          },
                          tq.params().values(), tl.grad)
                          .max_relative_error;
    TwinQ q(4, 2, {8});
    q.init(rng);
    const Matrix cs = standard_normal(rng, 4, 6);
    const Matrix ca = standard_normal(rng, 2, 6);
    const Vector cy = standard_normal(rng, 6, 1);
    const auto ql = q.td_loss(cs, ca, cy);
    const double e2 = check_gradient(
                          [&](const Vector& v) {
                            auto c = q;
                            c.params() = ParamVector(q.params().layout(), v);
                            return c.td_loss(cs, ca, cy).loss;
                          },
                          q.params().values(), ql.grad)
                          .max_relative_error;
    return std::max(e1, e2);
  }));
  return r;
}

// ---- compounding-error bound ---------------------------------------------------------------------

/// Short DePO run on the grid world used for the trained-policy bound check.
inline trainer::ExperimentConfig bound_grid_config() {
  trainer::ExperimentConfig c;
  c.name = "bound_grid";
  c.agents = {trainer::EnvSpec{}};
  c.training = {20, 200, 100, 1000, 64, 5, 10, 200000, 4};
  c.optim = {0.05, 0.01, 0.05, 0.01, 0.05};
  c.objective.lambda_h = 1.0;
  c.objective.gamma = 0.9;
  c.objective.entropy_weight = 0.01;
  c.inverse.interval = 5;
  c.inverse.max_epochs = 50;
  c.validate();
  return c;
}

/// Short DePO run on the point mass used for the trained-policy bound check.
inline trainer::ExperimentConfig bound_pointmass_config() {
  trainer::ExperimentConfig c;
  c.name = "bound_pointmass";
  trainer::EnvSpec e;
  e.type = trainer::EnvType::pointmass;
  e.pointmass.horizon = 200;
  c.agents = {e};
  c.training = {6, 1000, 250, 5000, 64, 3, 5, 200000, 10};
  c.optim = {1e-3, 1e-3, 1e-3, 1e-3, 0.01};
  c.objective.lambda_h = 1.0;
  c.objective.gamma = 0.98;
  c.objective.entropy_weight = 0.0;
  c.objective.depg_estimator = trainer::DepgEstimator::pathwise;
  c.inverse.interval = 5;
  c.inverse.max_epochs = 50;
  c.networks.planner_hidden = {32};
  c.networks.inverse_hidden = {32};
  c.networks.q_hidden = {32, 32};
  c.networks.disc_hidden = {32, 32};
  c.networks.policy_hidden = {32};
  c.validate();
  return c;
}

inline Check bound_check(const std::string& name, const decoupled::ErrorBoundReport& rep) {
  const auto v = rep.violations();
  Check c;
  c.name = name;
  c.worst = static_cast<double>(v) / static_cast<double>(rep.size());  // violation fraction
  c.tolerance = 0.0;
  c.passed = v == 0 && rep.size() > 0;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu states, min slack %.3e", rep.size(), rep.worst_margin());
  c.detail = buf;
  return c;
}

inline void perturb(ParamVector& p, Rng& rng, double scale) {
  for (Eigen::Index i = 0; i < p.size(); ++i) p.values()(i) += scale * standard_normal(rng);
}

inline SuiteReport theorem2_suite() {
  SuiteReport r{"theorem2", {}};
  // Grid world.
  {
    const auto cfg = bound_grid_config();
    const auto run = trainer::run_algorithm1(cfg, 11);
    trainer::GridAgent agent(cfg, cfg.agents[0], 0);
    agent.policy().psi() = run.finals[0].net("planner");
    agent.policy().phi() = run.finals[0].net("inverse_dynamics");
    agent.refresh_planner();
    agent.refresh_inverse();
    const envs::GridWorld& gw = agent.env();
    const auto [L, C] = decoupled::grid_lipschitz(gw);
    std::vector<int> states;
    Rng rng(8000);
    for (int i = 0; i < 1000; ++i) states.push_back(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(gw.n_states()))));
    r.checks.push_back(bound_check("grid trained", decoupled::theorem2_report(agent.planner_table(), agent.inverse_table(), gw, states, L, C)));
    auto perturbed = agent.policy();
    perturb(perturbed.psi(), rng, 0.5);
    perturb(perturbed.phi(), rng, 0.5);
    r.checks.push_back(bound_check("grid perturbed", decoupled::theorem2_report(perturbed.planner_table(), perturbed.inverse_table(), gw,
                                                                                 states, L, C)));
  }
  // Point mass.
  {
    const auto cfg = bound_pointmass_config();
    const auto run = trainer::run_algorithm1(cfg, 12);
    trainer::PointMassAgent agent(cfg, cfg.agents[0], 0);
    agent.policy().psi() = run.finals[0].net("planner");
    agent.policy().phi() = run.finals[0].net("inverse_dynamics");
    const envs::PointMass& env = agent.env();
    Rng rng(8100);
    auto sample = [](Rng& g) {
      Vector s(4);
      for (int i = 0; i < 4; ++i) s(i) = uniform(g, -1.0, 1.0);
      return s;
    };
    const auto [L, C] = decoupled::estimate_pointmass_lipschitz(env, sample, rng);
    Matrix pts(4, 1000);
    for (int j = 0; j < 1000; ++j) pts.col(j) = sample(rng);
    const envs::Controller expert = [](const Vector& s) { return envs::pointmass_expert_action({}, s); };
    r.checks.push_back(bound_check("point-mass trained", decoupled::theorem2_report(agent.policy(), env, expert, pts, L, C)));
    auto perturbed = agent.policy();
    perturb(perturbed.psi(), rng, 0.05);
    perturb(perturbed.phi(), rng, 0.05);
    r.checks.push_back(bound_check("point-mass perturbed", decoupled::theorem2_report(perturbed, env, expert, pts, L, C)));
  }
  return r;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"occupancy", "gradients", "theorem1", "theorem2", "dominance"};
  return names;
}

/// Named suite; throws PreconditionError for an unknown name.
inline SuiteReport run_suite(const std::string& name) {
  if (name == "occupancy") return occupancy_suite();
  if (name == "gradients") return gradients_suite();
  if (name == "theorem1") return theorem1_suite();
  if (name == "theorem2") return theorem2_suite();
  if (name == "dominance") return dominance_suite();
  throw PreconditionError("unknown suite '" + name + "'");
}

}  // namespace depo::verify
