#include "depo/approx/gradcheck.hpp"
#include "depo/decoupled/continuous.hpp"
#include "depo/decoupled/qfunction.hpp"
#include "depo/decoupled/tabular.hpp"
#include "depo/decoupled/error_bound.hpp"
#include "depo/envs/gridworld.hpp"
#include "depo/envs/pointmass.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace depo;
using namespace depo::decoupled;
using approx::check_gradient;
using Catch::Approx;

namespace {

constexpr double kFdTol = 1e-4;

TabularDecoupledPolicy grid_policy(const envs::GridWorld& gw, std::uint64_t seed) {
  TabularDecoupledPolicy p(gw.feature_matrix(), gw.n_actions(), {16}, {16});
  Rng rng(seed);
  p.init_planner(rng);
  p.init_inverse(rng);
  return p;
}

TabularTransitionBatch random_transitions(const envs::GridWorld& gw, Rng& rng, int n) {
  TabularTransitionBatch b;
  for (int i = 0; i < n; ++i) {
    const int s = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(gw.n_states())));
    const int a = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(gw.n_actions())));
    b.s.push_back(s);
    b.a.push_back(a);
    b.next.push_back(gw.next_state(s, a));
  }
  return b;
}

/// -(1/B) sum_b sum_a C(a,b) pi(a|s_b) for the composed policy at planner parameters v.
double composed_objective(const TabularDecoupledPolicy& base, const Vector& v, const InverseTable& inv,
                          const std::vector<int>& states, const Matrix& C) {
  TabularDecoupledPolicy p = base;
  p.psi() = ParamVector(base.psi().layout(), v);
  const Matrix pi = TabularDecoupledPolicy::compose(p.planner_table(), inv);
  double f = 0.0;
  for (std::size_t b = 0; b < states.size(); ++b) f -= pi.row(states[b]).dot(C.col(static_cast<Eigen::Index>(b)));
  return f / static_cast<double>(states.size());
}

ContinuousDecoupledPolicy small_continuous(std::uint64_t seed) {
  ContinuousPolicyShape shape;
  shape.state_dim = 4;
  shape.action_dim = 2;
  shape.planner_hidden = {8};
  shape.inverse_hidden = {8};
  shape.planner_residual_scale = 0.5;
  shape.inverse_delta_scale = 2.0;
  ContinuousDecoupledPolicy p(shape);
  Rng rng(seed);
  p.planner().net().init(p.psi(), rng);
  p.inverse().net().init(p.phi(), rng);
  return p;
}

ContinuousDecoupledPolicy with_psi(const ContinuousDecoupledPolicy& base, const Vector& v) {
  ContinuousDecoupledPolicy p = base;
  p.psi() = ParamVector(base.psi().layout(), v);
  return p;
}

ContinuousDecoupledPolicy with_phi(const ContinuousDecoupledPolicy& base, const Vector& v) {
  ContinuousDecoupledPolicy p = base;
  p.phi() = ParamVector(base.phi().layout(), v);
  return p;
}

}  // namespace

TEST_CASE("one-hot planner and inverse dynamics compose to a single action", "[depo][act]") {
  Matrix h = Matrix::Zero(3, 3);
  h(0, 2) = 1.0;
  h(1, 1) = 1.0;
  h(2, 2) = 1.0;
  InverseTable inv(3, Matrix::Constant(3, 2, 0.5));
  inv[0].row(2) << 0.0, 1.0;
  const Matrix pi = TabularDecoupledPolicy::compose(h, inv);
  CHECK(pi(0, 1) == 1.0);
  CHECK(pi(0, 0) == 0.0);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto a = act(h, inv, 0, rng);
    CHECK(a.planned == 2);
    CHECK(a.action == 1);
  }
  const auto d = act_deterministic(h, inv, 0);
  CHECK(d.planned == 2);
  CHECK(d.action == 1);
}

TEST_CASE("half-half planner over two successors gives half-half policy", "[depo][act]") {
  Matrix h = Matrix::Zero(3, 3);
  h.row(0) << 0.0, 0.5, 0.5;
  h.row(1) << 0.0, 1.0, 0.0;
  h.row(2) << 0.0, 0.0, 1.0;
  InverseTable inv(3, Matrix::Constant(3, 2, 0.5));
  inv[0].row(1) << 1.0, 0.0;
  inv[0].row(2) << 0.0, 1.0;
  const Matrix pi = TabularDecoupledPolicy::compose(h, inv);
  CHECK(pi(0, 0) == 0.5);
  CHECK(pi(0, 1) == 0.5);
}

TEST_CASE("composed grid policy is a distribution in every state", "[depo][act]") {
  envs::GridWorld gw;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = grid_policy(gw, seed);
    const Matrix pi = p.policy_table();
    for (int s = 0; s < gw.n_states(); ++s) CHECK(std::abs(pi.row(s).sum() - 1.0) <= 1e-9);
    CHECK((pi.array() >= 0.0).all());
  }
}

TEST_CASE("composition matches the per-successor product under deterministic dynamics", "[depo][act]") {
  envs::GridWorld gw;
  const int S = gw.n_states();
  const int A = gw.n_actions();
  Rng rng(4);
  // Planner supported on reachable successors; I one-hot on the smallest realizing action.
  Matrix h = Matrix::Zero(S, S);
  InverseTable inv(static_cast<std::size_t>(S), Matrix::Constant(S, A, 1.0 / A));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) h(s, gw.next_state(s, a)) += uniform(rng, 0.1, 1.0);
    h.row(s) /= h.row(s).sum();
    for (int a = A - 1; a >= 0; --a) {
      auto row = inv[static_cast<std::size_t>(s)].row(gw.next_state(s, a));
      row.setZero();
      row(a) = 1.0;
    }
  }
  const Matrix pi = TabularDecoupledPolicy::compose(h, inv);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const int n = gw.next_state(s, a);
      CHECK(std::abs(pi(s, a) - h(s, n) * inv[static_cast<std::size_t>(s)](n, a)) <= 1e-9);
    }
}

TEST_CASE("inverse dynamics loss gradient matches finite differences", "[depo][gradient]") {
  envs::GridWorld gw;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = grid_policy(gw, seed);
    Rng rng(100 + seed);
    const auto batch = random_transitions(gw, rng, 12);
    const auto lg = inverse_dynamics_loss(p, batch);
    const auto r = check_gradient(
        [&](const Vector& v) {
          auto q = p;
          q.phi() = ParamVector(p.phi().layout(), v);
          return inverse_dynamics_loss(q, batch).loss;
        },
        p.phi().values(), lg.grad);
    CHECK(r.max_relative_error <= kFdTol);
  }
}

TEST_CASE("inverse dynamics loss vanishes when I is certain of each action", "[depo]") {
  envs::GridWorld gw;
  TabularDecoupledPolicy p(gw.feature_matrix(), gw.n_actions(), {4}, {4});
  p.phi().view("inverse_dynamics/b1")(2, 0) = 800.0;
  TabularTransitionBatch batch{{0, 7, 9}, {2, 2, 2}, {1, 8, 10}};
  CHECK(inverse_dynamics_loss(p, batch).loss == Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(inverse_dynamics_loss(p, TabularTransitionBatch{}), PreconditionError);
}

TEST_CASE("trained inverse dynamics is one-hot on uniquely realized grid transitions", "[depo][slow]") {
  envs::GridWorld gw;
  TabularTransitionBatch all;
  for (int s = 0; s < gw.n_states(); ++s)
    for (int a = 0; a < gw.n_actions(); ++a) {
      int realizing = 0;
      for (int b = 0; b < gw.n_actions(); ++b) realizing += gw.next_state(s, b) == gw.next_state(s, a);
      if (realizing != 1) continue;
      all.s.push_back(s);
      all.a.push_back(a);
      all.next.push_back(gw.next_state(s, a));
    }
  TabularDecoupledPolicy big(gw.feature_matrix(), gw.n_actions(), {16}, {64});
  Rng rng(3);
  big.init_inverse(rng);
  approx::Adam adam(big.phi().size(), {1e-2});
  for (int i = 0; i < 1500; ++i) adam.step(big.phi(), inverse_dynamics_loss(big, all).grad);
  const auto I = big.inverse_table();
  int correct = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    Eigen::Index k = 0;
    I[static_cast<std::size_t>(all.s[i])].row(all.next[i]).maxCoeff(&k);
    correct += k == all.a[i];
  }
  CHECK(correct == static_cast<int>(all.size()));
}

TEST_CASE("uniform planner has supervised loss ln 36", "[depo]") {
  envs::GridWorld gw;
  TabularDecoupledPolicy p(gw.feature_matrix(), gw.n_actions(), {8}, {8});
  TabularPairBatch demo{{0, 1, 2}, {1, 2, 3}};
  CHECK(supervised_planner_loss(p, demo).loss == Approx(std::log(36.0)).epsilon(1e-12));
  CHECK_THROWS_AS(supervised_planner_loss(p, TabularPairBatch{}), PreconditionError);
}

TEST_CASE("supervised and CDePG gradients match finite differences", "[depo][gradient]") {
  envs::GridWorld gw;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = grid_policy(gw, seed);
    Rng rng(200 + seed);
    const auto t = random_transitions(gw, rng, 10);
    const TabularPairBatch pairs{t.s, t.next};
    Vector q(10);
    for (int i = 0; i < 10; ++i) q(i) = uniform(rng, -3.0, 3.0);
    auto at = [&](const Vector& v) {
      auto c = p;
      c.psi() = ParamVector(p.psi().layout(), v);
      return c;
    };
    const auto sup = supervised_planner_loss(p, pairs);
    CHECK(check_gradient([&](const Vector& v) { return supervised_planner_loss(at(v), pairs).loss; }, p.psi().values(), sup.grad)
              .max_relative_error <= kFdTol);
    const auto cd = cdepg_gradient(p, pairs, q);
    CHECK(check_gradient([&](const Vector& v) { return cdepg_gradient(at(v), pairs, q).loss; }, p.psi().values(), cd.grad)
              .max_relative_error <= kFdTol);
  }
}

TEST_CASE("CDePG weights and degenerate cases", "[depo]") {
  envs::GridWorld gw;
  const auto p = grid_policy(gw, 2);
  const TabularPairBatch pairs{{0, 6, 12, 13}, {1, 7, 13, 19}};
  const auto mle = supervised_planner_loss(p, pairs);
  const auto constant = cdepg_gradient(p, pairs, Vector::Constant(4, -2.5));
  CHECK(constant.grad == mle.grad);
  CHECK(constant.loss == mle.loss);
  const auto zero = weighted_planner_nll(p, pairs, Vector::Zero(4));
  CHECK(zero.grad.cwiseAbs().maxCoeff() == 0.0);
  const Vector w = normalize_q((Vector(4) << 1.0, 3.0, 2.0, 5.0).finished());
  CHECK(w(0) == 0.0);
  CHECK(w(3) == 1.0);
  CHECK(w(2) == Approx(0.25));
  CHECK_THROWS_AS(cdepg_gradient(p, TabularPairBatch{}, Vector()), PreconditionError);
}

TEST_CASE("expected DePG matches finite differences of the composed objective", "[depo][gradient]") {
  envs::GridWorld gw;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = grid_policy(gw, 10 + seed);
    const auto inv = p.inverse_table();
    Rng rng(300 + seed);
    Matrix qt(gw.n_states(), gw.n_actions());
    for (Eigen::Index i = 0; i < qt.size(); ++i) qt(i) = uniform(rng, -1.0, 2.0);
    std::vector<int> states;
    for (int i = 0; i < 8; ++i) states.push_back(static_cast<int>(uniform_index(rng, 36)));
    const Vector g = depg_gradient_expected(p, inv, states, qt);
    Matrix C(gw.n_actions(), 8);
    for (int b = 0; b < 8; ++b) C.col(b) = qt.row(states[static_cast<std::size_t>(b)]).transpose();
    const auto r = check_gradient([&](const Vector& v) { return composed_objective(p, v, inv, states, C); }, p.psi().values(), g);
    CHECK(r.max_relative_error <= kFdTol);
  }
}

TEST_CASE("sampled DePG on a two-state instance matches the Q log pi surrogate", "[depo][gradient]") {
  Matrix features(1, 2);
  features << -1.0, 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TabularDecoupledPolicy p(features, 2, {4}, {4});
    Rng rng(seed);
    p.init_planner(rng);
    p.init_inverse(rng);
    const auto inv = p.inverse_table();
    TabularTransitionBatch batch{{0, 1, 0, 1}, {0, 1, 1, 0}, {0, 1, 1, 0}};
    const Vector q = (Vector(4) << 0.7, -0.3, 1.2, 0.4).finished();
    const Vector g = depg_gradient(p, inv, batch, q);
    auto surrogate = [&](const Vector& v) {
      auto c = p;
      c.psi() = ParamVector(p.psi().layout(), v);
      const Matrix pi = TabularDecoupledPolicy::compose(c.planner_table(), inv);
      double f = 0.0;
      for (int b = 0; b < 4; ++b) f -= q(b) * std::log(pi(batch.s[static_cast<std::size_t>(b)], batch.a[static_cast<std::size_t>(b)]));
      return f / 4.0;
    };
    CHECK(check_gradient(surrogate, p.psi().values(), g).max_relative_error <= kFdTol);
  }
}

TEST_CASE("DePG vanishes when I ignores s' or Q is zero", "[depo]") {
  envs::GridWorld gw;
  auto p = grid_policy(gw, 5);
  Rng rng(6);
  const auto batch = random_transitions(gw, rng, 16);
  Vector q(16);
  for (int i = 0; i < 16; ++i) q(i) = uniform(rng, 0.5, 2.0);

  const Vector zero_q = depg_gradient(p, p.inverse_table(), batch, Vector::Zero(16));
  CHECK(zero_q.cwiseAbs().maxCoeff() == 0.0);

  // Zero the first-layer weights that read f(s') - f(s).
  auto W = p.phi().view("inverse_dynamics/W0");
  W.rightCols(2).setZero();
  const auto inv = p.inverse_table();
  CHECK(depg_gradient(p, inv, batch, q).cwiseAbs().maxCoeff() == 0.0);
  Matrix qt = Matrix::Constant(gw.n_states(), gw.n_actions(), 1.5);
  CHECK(depg_gradient_expected(p, inv, batch.s, qt).cwiseAbs().maxCoeff() == 0.0);

  // Combined update then reduces to lambda_h (supervised + cdepg).
  const TabularPairBatch pairs{batch.s, batch.next};
  const Vector sup = supervised_planner_loss(p, pairs).grad;
  const Vector cd = cdepg_gradient(p, pairs, q).grad;
  const auto rep = assemble(depg_gradient(p, inv, batch, q), sup, cd, 0.3);
  CHECK(rep.combined == Vector(0.3 * (sup + cd)));
}

TEST_CASE("importance weight floor signals support collapse", "[depo]") {
  CHECK_THROWS_AS(importance_weight(1.0, 1e-9, {}), NumericalError);
  CHECK(importance_weight(1.0, 1e-3, {}) == 50.0);
  CHECK(importance_weight(-1.0, 1e-3, {}) == -50.0);
  CHECK(importance_weight(0.5, 0.25, {}) == 2.0);
}

TEST_CASE("combined update weighting and frozen inverse dynamics", "[depo]") {
  envs::GridWorld gw;
  auto p = grid_policy(gw, 8);
  Rng rng(9);
  const auto batch = random_transitions(gw, rng, 8);
  const TabularPairBatch pairs{batch.s, batch.next};
  Vector q(8);
  for (int i = 0; i < 8; ++i) q(i) = uniform(rng, -1.0, 1.0);
  const Vector depg = depg_gradient(p, p.inverse_table(), batch, q);
  const Vector sup = supervised_planner_loss(p, pairs).grad;
  const Vector cd = cdepg_gradient(p, pairs, q).grad;

  const auto r0 = assemble(depg, sup, cd, 0.0);
  CHECK(r0.combined == depg);

  const Vector phi_before = p.phi().values();
  const Vector psi_before = p.psi().values();
  approx::Adam adam(p.psi().size(), {});
  const auto rep = combined_update(p, adam, depg, sup, cd, 0.7);
  CHECK(rep.combined == Vector(depg + 0.7 * (sup + cd)));
  CHECK(p.phi().values() == phi_before);
  CHECK(p.psi().values() != psi_before);
  CHECK_THROWS_AS(assemble(depg, Vector::Zero(3), cd, 1.0), DimensionError);
}

TEST_CASE("end-to-end policy gradient matches finite differences in both modules", "[depo][gradient]") {
  envs::GridWorld gw;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = grid_policy(gw, 20 + seed);
    Rng rng(400 + seed);
    std::vector<int> states;
    for (int i = 0; i < 5; ++i) states.push_back(static_cast<int>(uniform_index(rng, 36)));
    Matrix C(gw.n_actions(), 5);
    for (Eigen::Index i = 0; i < C.size(); ++i) C(i) = uniform(rng, -1.0, 1.0);
    const auto [gpsi, gphi] = end_to_end_policy_gradient(p, states, C);
    auto objective = [&](const TabularDecoupledPolicy& c) {
      const Matrix pi = c.policy_table();
      double f = 0.0;
      for (std::size_t b = 0; b < states.size(); ++b) f -= pi.row(states[b]).dot(C.col(static_cast<Eigen::Index>(b)));
      return f / 5.0;
    };
    CHECK(check_gradient(
              [&](const Vector& v) {
                auto c = p;
                c.psi() = ParamVector(p.psi().layout(), v);
                return objective(c);
              },
              p.psi().values(), gpsi)
              .max_relative_error <= kFdTol);
    CHECK(check_gradient(
              [&](const Vector& v) {
                auto c = p;
                c.phi() = ParamVector(p.phi().layout(), v);
                return objective(c);
              },
              p.phi().values(), gphi)
              .max_relative_error <= kFdTol);
  }
}

TEST_CASE("argmax labels from exact inverse dynamics equal expert actions on the path", "[depo][bco]") {
  envs::GridWorld gw;
  const int S = gw.n_states();
  InverseTable inv(static_cast<std::size_t>(S), Matrix::Constant(S, gw.n_actions(), 0.25));
  for (int s = 0; s < S; ++s)
    for (int a = gw.n_actions() - 1; a >= 0; --a) {
      auto row = inv[static_cast<std::size_t>(s)].row(gw.next_state(s, a));
      row.setZero();
      row(a) = 1.0;
    }
  const auto path = gw.expert_path_states();
  TabularPairBatch pairs;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    pairs.s.push_back(path[i]);
    pairs.next.push_back(path[i + 1]);
  }
  const auto labels = label_actions(inv, pairs);
  const auto expert = gw.expert_policy();
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(expert.probs()(pairs.s[i], labels[i]) == 1.0);
}

TEST_CASE("monolithic tabular policy losses match finite differences", "[depo][gradient]") {
  envs::GridWorld gw;
  TabularMonolithicPolicy p(gw.feature_matrix(), gw.n_actions(), {8});
  Rng rng(11);
  p.init(rng);
  Matrix qt(gw.n_states(), gw.n_actions());
  for (Eigen::Index i = 0; i < qt.size(); ++i) qt(i) = uniform(rng, -1.0, 1.0);
  const std::vector<int> states{0, 5, 17, 30, 35};
  const std::vector<int> actions{0, 1, 2, 3, 1};
  auto at = [&](const Vector& v) {
    auto c = p;
    c.theta() = ParamVector(p.theta().layout(), v);
    return c;
  };
  const auto sp = soft_policy_loss(p, states, qt, 0.2);
  CHECK(check_gradient([&](const Vector& v) { return soft_policy_loss(at(v), states, qt, 0.2).loss; }, p.theta().values(), sp.grad)
            .max_relative_error <= kFdTol);
  const auto bc = behavior_cloning_loss(p, states, actions);
  CHECK(check_gradient([&](const Vector& v) { return behavior_cloning_loss(at(v), states, actions).loss; }, p.theta().values(),
                       bc.grad)
            .max_relative_error <= kFdTol);
}

TEST_CASE("tabular TD gradient matches finite differences", "[depo][gradient]") {
  TabularQ q(6, 3);
  Rng rng(12);
  for (Eigen::Index i = 0; i < q.params().size(); ++i) q.params().values()(i) = uniform(rng, -1.0, 1.0);
  const std::vector<int> s{0, 1, 1, 5};
  const std::vector<int> a{2, 0, 0, 1};
  const Vector y = (Vector(4) << 0.3, -1.0, 0.2, 2.0).finished();
  const auto lg = q.td_loss(s, a, y);
  const auto r = check_gradient(
      [&](const Vector& v) {
        TabularQ c = q;
        c.params() = ParamVector(q.params().layout(), v);
        return c.td_loss(s, a, y).loss;
      },
      q.params().values(), lg.grad);
  CHECK(r.max_relative_error <= kFdTol);
  CHECK_THROWS_AS(q.td_loss({}, {}, Vector()), PreconditionError);
}

TEST_CASE("twin-Q TD gradient matches finite differences", "[depo][gradient]") {
  TwinQ q(4, 2, {8});
  Rng rng(13);
  q.init(rng);
  const Matrix s = standard_normal(rng, 4, 6);
  const Matrix a = standard_normal(rng, 2, 6);
  const Vector y = standard_normal(rng, 6, 1);
  const auto lg = q.td_loss(s, a, y);
  const auto r = check_gradient(
      [&](const Vector& v) {
        TwinQ c = q;
        c.params() = ParamVector(q.params().layout(), v);
        return c.td_loss(s, a, y).loss;
      },
      q.params().values(), lg.grad);
  CHECK(r.max_relative_error <= kFdTol);
}

TEST_CASE("continuous likelihood gradients match finite differences", "[depo][gradient]") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto p = small_continuous(seed);
    Rng rng(500 + seed);
    const Matrix s = standard_normal(rng, 4, 6);
    const Matrix next = s + 0.1 * standard_normal(rng, 4, 6);
    const Matrix a = 0.5 * standard_normal(rng, 2, 6);
    Vector q(6);
    for (int i = 0; i < 6; ++i) q(i) = uniform(rng, -2.0, 2.0);

    const auto inv = inverse_dynamics_loss(p, s, a, next);
    CHECK(check_gradient([&](const Vector& v) { return inverse_dynamics_loss(with_phi(p, v), s, a, next).loss; }, p.phi().values(),
                         inv.grad)
              .max_relative_error <= kFdTol);
    const auto sup = supervised_planner_loss(p, s, next);
    CHECK(check_gradient([&](const Vector& v) { return supervised_planner_loss(with_psi(p, v), s, next).loss; }, p.psi().values(),
                         sup.grad)
              .max_relative_error <= kFdTol);
    const auto cd = cdepg_gradient(p, s, next, q);
    CHECK(check_gradient([&](const Vector& v) { return cdepg_gradient(with_psi(p, v), s, next, q).loss; }, p.psi().values(), cd.grad)
              .max_relative_error <= kFdTol);
  }
}

TEST_CASE("likelihood-ratio DePG matches finite differences of its surrogate", "[depo][gradient]") {
  const Eigen::Index M = 16;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = small_continuous(30 + seed);
    Rng rng(600 + seed);
    const Matrix s = standard_normal(rng, 4, 3);
    const Matrix a = 0.3 * standard_normal(rng, 2, 3);
    const Matrix eps = standard_normal(rng, 4, 3 * M);
    const Vector q = (Vector(3) << 0.02, -0.01, 0.015).finished();
    const Vector pi = marginal_policy_density(p, s, a, eps, M);
    Vector w(3);
    for (int b = 0; b < 3; ++b) w(b) = importance_weight(q(b), pi(b), {});
    const Vector g = depg_gradient(p, s, a, q, eps, M);
    auto surrogate = [&](const Vector& v) {
      const auto c = with_psi(p, v);
      const Vector d = marginal_policy_density(c, s, a, eps, M);
      return -(w.array() * d.array()).sum() / 3.0;
    };
    CHECK(check_gradient(surrogate, p.psi().values(), g).max_relative_error <= kFdTol);
  }
}

TEST_CASE("pathwise DePG matches finite differences in planner and inverse dynamics", "[depo][gradient]") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = small_continuous(40 + seed);
    TwinQ q(4, 2, {8});
    Rng rng(700 + seed);
    q.init(rng);
    const Matrix s = standard_normal(rng, 4, 5);
    const Matrix e1 = standard_normal(rng, 4, 5);
    const Matrix e2 = 0.3 * standard_normal(rng, 2, 5);
    for (double alpha : {0.0, 0.2}) {
      const auto g = pathwise_policy_gradient(p, q, s, e1, e2, alpha);
      CHECK(check_gradient([&](const Vector& v) { return -pathwise_policy_gradient(with_psi(p, v), q, s, e1, e2, alpha).objective; },
                           p.psi().values(), g.psi)
                .max_relative_error <= kFdTol);
      CHECK(check_gradient([&](const Vector& v) { return -pathwise_policy_gradient(with_phi(p, v), q, s, e1, e2, alpha).objective; },
                           p.phi().values(), g.phi)
                .max_relative_error <= kFdTol);
    }
  }
}

TEST_CASE("continuous monolithic policy losses match finite differences", "[depo][gradient]") {
  ContinuousMonolithicPolicy p(4, 2, {8});
  TwinQ q(4, 2, {8});
  Rng rng(14);
  p.head().net().init(p.theta(), rng);
  q.init(rng);
  const Matrix s = standard_normal(rng, 4, 5);
  const Matrix eps = 0.3 * standard_normal(rng, 2, 5);
  const Matrix a = 0.5 * standard_normal(rng, 2, 5);
  auto at = [&](const Vector& v) {
    auto c = p;
    c.theta() = ParamVector(p.theta().layout(), v);
    return c;
  };
  const auto sp = soft_policy_loss(p, q, s, eps, 0.2);
  CHECK(check_gradient([&](const Vector& v) { return soft_policy_loss(at(v), q, s, eps, 0.2).loss; }, p.theta().values(), sp.grad)
            .max_relative_error <= kFdTol);
  const auto bc = behavior_cloning_loss(p, s, a);
  CHECK(check_gradient([&](const Vector& v) { return behavior_cloning_loss(at(v), s, a).loss; }, p.theta().values(), bc.grad)
            .max_relative_error <= kFdTol);
}

TEST_CASE("error bound is tight at zero for the exact grid planner and inverse dynamics", "[depo][bound]") {
  envs::GridWorld gw;
  const int S = gw.n_states();
  const auto expert = gw.expert_policy();
  Matrix h = Matrix::Zero(S, S);
  InverseTable inv(static_cast<std::size_t>(S), Matrix::Constant(S, gw.n_actions(), 0.25));
  for (int s = 0; s < S; ++s) {
    Eigen::Index a = 0;
    expert.probs().row(s).maxCoeff(&a);
    h(s, gw.next_state(s, static_cast<int>(a))) = 1.0;
    for (int t = 0; t < S; ++t) {
      inv[static_cast<std::size_t>(s)].row(t).setZero();
      inv[static_cast<std::size_t>(s)](t, grid_true_inverse(gw, s, t)) = 1.0;
    }
  }
  std::vector<int> states(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) states[static_cast<std::size_t>(s)] = s;
  const auto [L, C] = grid_lipschitz(gw);
  const auto r = theorem2_report(h, inv, gw, states, L, C);
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(r.observed_gap[i] == 0.0);
    CHECK(r.planner_term[i] == 0.0);
    CHECK(r.invdyn_term[i] == 0.0);
  }
}

TEST_CASE("error bound holds for random grid and point-mass policies", "[depo][bound]") {
  envs::GridWorld gw;
  const auto [L, C] = grid_lipschitz(gw);
  CHECK(L == Approx(2.0));  // opposite moves
  std::vector<int> states;
  Rng rng(15);
  for (int i = 0; i < 1000; ++i) states.push_back(static_cast<int>(uniform_index(rng, 36)));
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = grid_policy(gw, 50 + seed);
    CHECK(theorem2_report(p.planner_table(), p.inverse_table(), gw, states, L, C).holds());
  }

  envs::PointMass env;
  auto sample = [&](Rng& r) {
    Vector s(4);
    s << uniform(r, -1.0, 1.0), uniform(r, -1.0, 1.0), uniform(r, -1.0, 1.0), uniform(r, -1.0, 1.0);
    return s;
  };
  const auto [pl, pc] = estimate_pointmass_lipschitz(env, sample, rng);
  CHECK(pl == Approx(0.05).epsilon(1e-6));
  CHECK(pc == Approx(20.0).epsilon(1e-6));
  Matrix pts(4, 1000);
  for (int j = 0; j < 1000; ++j) pts.col(j) = sample(rng);
  const auto p = small_continuous(60);
  const envs::Controller expert = [](const Vector& s) { return envs::pointmass_expert_action({}, s); };
  const auto r = theorem2_report(p, env, expert, pts, pl, pc);
  CHECK(r.size() == 1000);
  CHECK(r.holds());
}
