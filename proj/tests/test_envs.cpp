#include "depo/envs/demonstrations.hpp"
#include "depo/envs/gridworld.hpp"
#include "depo/envs/pointmass.hpp"
#include "depo/mdp/redundancy.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace depo;
using namespace depo::envs;

namespace {
GridWorld grid(int k) {
  GridConfig c;
  c.k = k;
  return GridWorld(c);
}
}  // namespace

TEST_CASE("grid expert follows the default path", "[envs][grid]") {
  const auto g1 = grid(1);
  const auto pi1 = g1.expert_policy();
  CHECK(pi1(g1.index({0, 0}), static_cast<int>(Direction::right)) == 1.0);
  CHECK(pi1(g1.index({5, 3}), static_cast<int>(Direction::up)) == 1.0);

  const auto g2 = grid(2);
  const auto pi2 = g2.expert_policy();
  const int s = g2.index({2, 0});
  CHECK(pi2(s, 1) == 0.5);
  CHECK(pi2(s, 5) == 0.5);
  CHECK(pi2.probs().row(s).sum() == 1.0);
}

TEST_CASE("grid configuration is validated", "[envs][grid]") {
  GridConfig c;
  c.expert_path = "RRRRUUUUU";
  CHECK_THROWS_AS(GridWorld(c), InvariantError);
  c.expert_path = "RRRRRUUUUL";
  CHECK_THROWS_AS(GridWorld(c), InvariantError);
  GridConfig d;
  d.k = 0;
  CHECK_THROWS_AS(GridWorld(d), InvariantError);
}

TEST_CASE("grid dynamics and tabular encoding", "[envs][grid]") {
  const auto g1 = grid(1);
  const auto m1 = g1.to_finite_mdp();
  CHECK(m1.n_states() == 36);
  CHECK(m1.n_actions() == 4);
  const int origin = g1.index({0, 0});
  CHECK(m1.prob(origin, static_cast<int>(Direction::left), origin) == 1.0);
  CHECK(m1.prob(origin, static_cast<int>(Direction::down), origin) == 1.0);
  CHECK(g1.next_state(origin, static_cast<int>(Direction::up)) == g1.index({0, 1}));
  CHECK(g1.start_states().size() == 32);

  const auto g4 = grid(4);
  const auto m4 = g4.to_finite_mdp();
  CHECK(m4.n_actions() == 16);
  for (std::size_t s = 0; s < m4.n_states(); ++s) {
    const auto groups = mdp::same_next_state_action_set(m4, s);
    const auto c = g4.cell(static_cast<int>(s));
    const bool corner = (c.x == 0 || c.x == 5) && (c.y == 0 || c.y == 5);
    const bool edge = c.x == 0 || c.x == 5 || c.y == 0 || c.y == 5;
    // Blocked directions collapse into one "stay" group.
    const std::size_t expected = corner ? 3 : 4;
    CHECK(groups.size() == expected);
    if (!edge) {
      for (const auto& grp : groups) {
        CHECK(grp.size() == 4);
        for (auto a : grp) CHECK(a % 4 == grp.front() % 4);
      }
    }
  }
}

TEST_CASE("grid k=2 has a redundancy witness at every state", "[envs][grid]") {
  const auto m = grid(2).to_finite_mdp();
  for (std::size_t s = 0; s < m.n_states(); ++s) {
    const auto w = mdp::redundancy_witness_at_state(m, s);
    REQUIRE(w.has_value());
    CHECK(mdp::is_valid_witness(m, *w));
  }
}

TEST_CASE("within-group redistribution on the grid keeps exact values", "[envs][grid][theorem1]") {
  SECTION("k=2 swap between the two right actions at (0,0)") {
    const auto g = grid(2);
    const auto m = g.to_finite_mdp();
    const auto pi = g.expert_policy();
    mdp::Vector repl = mdp::Vector::Zero(8);
    repl(1) = 0.9;
    repl(5) = 0.1;
    const auto r = mdp::verify_theorem1(m, pi, g.index({0, 0}), repl);
    CHECK(r.max_value_difference <= 1e-10);
  }
  for (int k : {2, 4}) {
    const auto g = grid(k);
    const auto m = g.to_finite_mdp();
    const auto pi = g.expert_policy();
    Rng rng(100 + k);
    for (int trial = 0; trial < 10; ++trial) {
      const int s = static_cast<int>(uniform_index(rng, 36));
      const int d = static_cast<int>(g.expert_direction(s));
      mdp::Vector repl = mdp::Vector::Zero(4 * k);
      for (int j = 0; j < k; ++j) repl(d + 4 * j) = uniform01(rng) + 1e-3;
      repl /= repl.sum();
      const auto r = mdp::verify_theorem1(m, pi, s, repl);
      CHECK(r.max_value_difference < 1e-9);
    }
  }
}

TEST_CASE("grid demonstrations", "[envs][grid][demo]") {
  const auto g = grid(1);
  const auto demo = collect_grid_demonstrations(g, g.expert_policy(), 1, 3);
  REQUIRE(demo.count() == 1);
  const auto& t = demo.trajectories[0];
  REQUIRE(t.cols() == 11);
  for (int i = 0; i <= 5; ++i) CHECK(t.col(i) == Eigen::Vector2d(i, 0));
  for (int i = 1; i <= 5; ++i) CHECK(t.col(5 + i) == Eigen::Vector2d(5, i));

  CHECK(collect_grid_demonstrations(g, g.expert_policy(), 0, 3).count() == 0);

  // Every consecutive pair is reachable by some action (k=4 expert samples among redundant actions).
  const auto g4 = grid(4);
  const auto d4 = collect_grid_demonstrations(g4, g4.expert_policy(), 3, 9);
  auto [s, next] = d4.pairs();
  for (Eigen::Index i = 0; i < s.cols(); ++i) {
    const int a_state = g4.index({static_cast<int>(s(0, i)), static_cast<int>(s(1, i))});
    const int b_state = g4.index({static_cast<int>(next(0, i)), static_cast<int>(next(1, i))});
    bool found = false;
    for (int a = 0; a < g4.n_actions(); ++a) found = found || g4.next_state(a_state, a) == b_state;
    CHECK(found);
  }
}

TEST_CASE("point-mass dynamics, transforms and expert", "[envs][pointmass]") {
  PointMass env;
  CHECK(pointmass_expert_action({1.0, 1.0}, Eigen::Vector4d::Zero()) == Eigen::Vector2d::Zero());
  CHECK(pointmass_expert_action({1.0, 1.0}, Eigen::Vector4d(1, 0, 0, 0)) == Eigen::Vector2d(-1, 0));

  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd a(2);
    a << uniform(rng, -1, 1), uniform(rng, -1, 1);
    CHECK(apply_transform(ActionTransform::inverted, apply_transform(ActionTransform::inverted, a)) == a);
    Eigen::VectorXd b(4);
    for (int j = 0; j < 4; ++j) b(j) = uniform(rng, -1, 1);
    CHECK(apply_transform(ActionTransform::complex_double, b).allFinite());
  }
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK(apply_transform(ActionTransform::complex_double, zero).isApprox(
      Eigen::VectorXd::Constant(2, (1.0 - std::exp(1.0)) / 1.5)));

  PointMassConfig cfg;
  cfg.transform = ActionTransform::inverted;
  PointMass inv(cfg);
  Eigen::Vector4d s(0.1, -0.2, 0.5, 0.0);
  CHECK(inv.step(s, Eigen::Vector2d(1, 0)).isApprox(env.step(s, Eigen::Vector2d(-1, 0))));
  CHECK(env.step(s, Eigen::Vector2d(5, 0)) == env.step(s, Eigen::Vector2d(1, 0)));

  const PdGains gains;
  std::vector<Eigen::Vector4d> starts{{1, 1, 0, 0}, {-1, 1, 0, 0}, {1, -1, 0, 0}, {-1, -1, 0, 0}};
  for (int i = 0; i < 100; ++i) starts.push_back(env.sample_start(rng));
  for (const auto& st : starts) {
    Eigen::VectorXd x = st;
    int t = 0;
    while (!env.in_goal(x) && t < env.horizon()) {
      x = env.step(x, pointmass_expert_action(gains, x));
      ++t;
    }
    CHECK(env.in_goal(x));
  }
}

TEST_CASE("point-mass demonstrations are deterministic and valid", "[envs][pointmass][demo]") {
  PointMass env;
  const PdGains gains;
  const Controller ctl = [&](const Eigen::VectorXd& s) -> Eigen::VectorXd { return pointmass_expert_action(gains, s); };
  const auto a = collect_pointmass_demonstrations(env, ctl, 4, 77);
  const auto b = collect_pointmass_demonstrations(env, ctl, 4, 77);
  CHECK(a == b);
  std::ostringstream sa, sb;
  write_demonstration(sa, a);
  write_demonstration(sb, b);
  CHECK(sa.str() == sb.str());

  auto [s, next] = a.pairs();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < s.cols(); ++i) {
    const Eigen::VectorXd act = env.true_inverse_dynamics(s.col(i), next.col(i));
    worst = std::max(worst, (env.step(s.col(i), act) - next.col(i)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("demonstration files round-trip bit-exactly", "[envs][demo]") {
  PointMass env;
  const PdGains gains;
  const auto demo = collect_pointmass_demonstrations(
      env, [&](const Eigen::VectorXd& s) -> Eigen::VectorXd { return pointmass_expert_action(gains, s); }, 2, 5);
  std::stringstream ss;
  write_demonstration(ss, demo);
  const auto back = read_demonstration(ss);
  CHECK(back == demo);

  std::stringstream bad("depo-demonstrations 1\nenv x\nstate_dim 2\ncount 1\nseed 0\ntrajectory 1\n0x1p+0\nend\n");
  CHECK_THROWS_AS(read_demonstration(bad), FormatError);
  std::stringstream wrong("hello\n");
  CHECK_THROWS_AS(read_demonstration(wrong), FormatError);
}
