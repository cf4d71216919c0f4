#include "depo/approx/adam.hpp"
#include "depo/approx/checkpoint.hpp"
#include "depo/approx/gradcheck.hpp"
#include "depo/approx/mlp.hpp"
#include "depo/approx/tape.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>

using namespace depo;
using namespace depo::approx;
using Catch::Approx;

namespace {

ParamVector make_params(const std::vector<const Mlp*>& nets, std::uint64_t seed) {
  ParamLayout layout;
  for (auto* n : nets) n->add_to(layout);
  ParamVector p(layout);
  Rng rng(seed);
  for (auto* n : nets) n->init(p, rng);
  return p;
}

/// Evaluates a scalar tape objective at a perturbed copy of the parameters.
template <class Build>
double objective_at(const ParamVector& base, const Vector& values, Build&& build) {
  ParamVector p(base.layout(), values);
  Tape t;
  return t.scalar(build(t, p));
}

template <class Build>
GradCheckResult check_tape_objective(const ParamVector& params, Build&& build) {
  Tape t;
  Var out = build(t, params);
  t.backward(out);
  const Vector g = t.gradient(params);
  return check_gradient([&](const Vector& v) { return objective_at(params, v, build); }, params.values(), g);
}

}  // namespace

TEST_CASE("param layout tiles the flat array", "[approx]") {
  ParamLayout layout;
  layout.add("a", 2, 3);
  layout.add("b", 4, 1);
  CHECK(layout.size() == 10);
  CHECK(layout.slice("b").offset == 6);
  CHECK_THROWS_AS(layout.add("a", 1, 1), InvariantError);
  CHECK_THROWS_AS(layout.slice("missing"), InvariantError);
  ParamVector p(layout);
  p.view("a")(1, 2) = 5.0;
  CHECK(p.values()(5) == 5.0);  // column-major
}

TEST_CASE("zero weights give the output bias", "[approx][mlp]") {
  Mlp net("f", {3, {5, 4}, 2});
  ParamLayout layout;
  net.add_to(layout);
  ParamVector p(layout);
  p.view("f/b2") << 0.7, -1.3;
  Matrix x = Matrix::Random(3, 6);
  Matrix y = net.forward(p, x);
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    CHECK(y(0, j) == 0.7);
    CHECK(y(1, j) == -1.3);
  }
}

TEST_CASE("identity linear net returns its input", "[approx][mlp]") {
  Mlp net("id", {4, {}, 4});
  ParamLayout layout;
  net.add_to(layout);
  ParamVector p(layout);
  p.view("id/W0") = Matrix::Identity(4, 4);
  Matrix x = Matrix::Random(4, 7);
  CHECK(net.forward(p, x) == x);
  Tape t;
  CHECK(t.value(net.forward(t, p, t.constant(x))) == x);
}

TEST_CASE("mlp forward validates its input", "[approx][mlp]") {
  Mlp net("f", {3, {4}, 1});
  const ParamVector p = make_params({&net}, 1);
  CHECK_THROWS_AS(net.forward(p, Matrix::Zero(2, 1)), DimensionError);
  Matrix bad = Matrix::Zero(3, 1);
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(net.forward(p, bad), NumericalError);
}

TEST_CASE("forward passes are bitwise deterministic and match the taped pass", "[approx][mlp]") {
  Mlp net("f", {3, {16, 16}, 2});
  const ParamVector p = make_params({&net}, 9);
  Rng rng(2);
  const Matrix x = standard_normal(rng, 3, 10);
  const Matrix a = net.forward(p, x);
  CHECK(net.forward(p, x) == a);
  Tape t;
  CHECK(t.value(net.forward(t, p, t.constant(x))) == a);
}

TEST_CASE("random net seed 5: gradient of sum(out^2)/2 matches central differences", "[approx][mlp]") {
  Mlp net("f", {3, {8, 6}, 2});
  const ParamVector p = make_params({&net}, 5);
  Rng rng(5);
  const Matrix x = standard_normal(rng, 3, 4);
  auto build = [&](Tape& t, const ParamVector& q) {
    return scale(t, sum(t, square(t, net.forward(t, q, t.constant(x)))), 0.5);
  };
  const auto r = check_tape_objective(p, build);
  INFO("worst " << r.worst_index);
  CHECK(r.max_relative_error <= 1e-4);
}

TEST_CASE("d(theta^2)/dtheta at 3 is 6", "[approx][tape]") {
  Tape t;
  Var theta = t.variable(Matrix::Constant(1, 1, 3.0));
  t.backward(square(t, theta));
  CHECK(t.grad(theta)(0, 0) == 6.0);
}

TEST_CASE("every primitive passes a finite-difference check", "[approx][tape]") {
  ParamLayout layout;
  layout.add("x", 3, 4);
  layout.add("y", 3, 4);
  layout.add("w", 1, 4);
  layout.add("m", 4, 3);
  ParamVector p(layout);
  Rng rng(13);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.values()(i) = uniform(rng, 0.2, 1.5);
  const std::vector<Eigen::Index> idx{0, 2, 1, 2};

  using Build = std::function<Var(Tape&, const ParamVector&)>;
  std::vector<std::pair<std::string, Build>> cases = {
      {"matmul", [](Tape& t, const ParamVector& q) { return sum(t, square(t, matmul(t, t.param(q, "m"), t.param(q, "x")))); }},
      {"matmul_tn", [](Tape& t, const ParamVector& q) { return sum(t, square(t, matmul_tn(t, t.param(q, "x"), t.param(q, "y")))); }},
      {"mul/sub", [](Tape& t, const ParamVector& q) { return sum(t, mul(t, t.param(q, "x"), sub(t, t.param(q, "y"), t.param(q, "x")))); }},
      {"tanh", [](Tape& t, const ParamVector& q) { return sum(t, mul(t, approx::tanh(t, t.param(q, "x")), t.param(q, "y"))); }},
      {"exp/log", [](Tape& t, const ParamVector& q) { return sum(t, mul(t, approx::log(t, t.param(q, "x")), approx::exp(t, t.param(q, "y")))); }},
      {"sigmoid", [](Tape& t, const ParamVector& q) { return sum(t, mul(t, sigmoid(t, t.param(q, "x")), t.param(q, "y"))); }},
      {"log_sigmoid", [](Tape& t, const ParamVector& q) { return sum(t, mul(t, log_sigmoid(t, scale(t, t.param(q, "x"), -3.0)), t.param(q, "y"))); }},
      {"softplus", [](Tape& t, const ParamVector& q) { return sum(t, mul(t, softplus(t, t.param(q, "x")), t.param(q, "y"))); }},
      {"sqrt_eps", [](Tape& t, const ParamVector& q) { return sum(t, sqrt_eps(t, t.param(q, "x"), 1e-6)); }},
      {"log_softmax/pick", [idx](Tape& t, const ParamVector& q) { return sum(t, mul_columns(t, pick(t, log_softmax(t, t.param(q, "x")), idx), t.param(q, "w"))); }},
      {"concat/rows", [](Tape& t, const ParamVector& q) {
         Var c = concat_rows(t, t.param(q, "x"), t.param(q, "y"));
         return sum(t, square(t, rows(t, c, 2, 3)));
       }},
      {"sum_rows/mean", [](Tape& t, const ParamVector& q) { return mean(t, square(t, sum_rows(t, t.param(q, "x")))); }},
      {"reshape/minimum", [](Tape& t, const ParamVector& q) {
         Var r = reshape(t, t.param(q, "x"), 4, 3);
         return sum(t, square(t, minimum(t, r, scale(t, t.param(q, "m"), 0.9))));
       }},
      {"gather", [](Tape& t, const ParamVector& q) {
         return sum(t, square(t, gather(t, t.param(q, "x"), {0, 5, 5, 11})));
       }},
      {"clamp interior", [](Tape& t, const ParamVector& q) { return sum(t, square(t, clamp(t, t.param(q, "x"), 0.0, 1.0))); }},
      {"gaussian", [](Tape& t, const ParamVector& q) {
         return sum(t, gaussian_log_density(t, t.param(q, "x"), t.param(q, "y"), scale(t, t.param(q, "x"), 0.3)));
       }},
  };
  for (auto& [name, build] : cases) {
    const auto r = check_tape_objective(p, build);
    INFO(name << " worst index " << r.worst_index);
    CHECK(r.max_relative_error <= 1e-4);
  }

  ParamLayout l2;
  l2.add("X", 3, 5);
  l2.add("b", 3, 1);
  ParamVector q(l2);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.values()(i) = uniform(rng, -1, 1);
  const auto r = check_tape_objective(
      q, [](Tape& t, const ParamVector& v) { return sum(t, approx::tanh(t, add_bias(t, t.param(v, "X"), t.param(v, "b")))); });
  INFO("add_bias");
  CHECK(r.max_relative_error <= 1e-4);
}

TEST_CASE("gaussian score at the mode is zero and the density integrates to one", "[approx][gaussian]") {
  Tape t;
  Var mu = t.variable(Matrix::Constant(1, 1, 0.4));
  Var ls = t.constant(Matrix::Constant(1, 1, -0.7));
  Var x = t.constant(Matrix::Constant(1, 1, 0.4));
  t.backward(sum(t, gaussian_log_density(t, x, mu, ls)));
  CHECK(t.grad(mu)(0, 0) == 0.0);

  // Trapezoid over +-12 sigma.
  const double sigma = std::exp(-0.7);
  const int n = 20000;
  Matrix grid(1, n + 1);
  for (int i = 0; i <= n; ++i) grid(0, i) = 0.4 - 12 * sigma + 24 * sigma * i / n;
  Tape t2;
  Var lp = gaussian_log_density(t2, t2.constant(grid), t2.constant(Matrix::Constant(1, n + 1, 0.4)),
                                t2.constant(Matrix::Constant(1, n + 1, -0.7)));
  const Matrix dens = t2.value(lp).array().exp();
  const double h = 24 * sigma / n;
  const double integral = h * (dens.sum() - 0.5 * (dens(0, 0) + dens(0, n)));
  CHECK(integral == Approx(1.0).margin(1e-9));
}

TEST_CASE("reparameterized sampling", "[approx][gaussian]") {
  GaussianHead head("h", 3, {8}, 2);
  ParamLayout layout;
  head.net().add_to(layout);
  ParamVector p(layout);
  Rng rng(4);
  head.net().init(p, rng);
  const Matrix x = standard_normal(rng, 3, 5);

  SECTION("eps = 0 gives the mean") {
    auto [mean, log_std] = head.forward(p, x);
    CHECK(head.sample(p, x, Matrix::Zero(2, 5)) == mean);
  }
  SECTION("log_std clamped at -20 keeps the sample within 1e-8 |eps| of the mean") {
    p.view("h/b1").bottomRows(2).setConstant(-1e6);
    const Matrix eps = standard_normal(rng, 2, 5);
    auto [mean, log_std] = head.forward(p, x);
    CHECK((log_std.array() == kLogStdMin).all());
    const Matrix s = head.sample(p, x, eps);
    CHECK(((s - mean).array().abs() <= 1e-8 * eps.array().abs()).all());
  }
  SECTION("d sample / d mean-params equals d mean / d params") {
    const Matrix eps = standard_normal(rng, 2, 5);
    Tape t1;
    auto o1 = head.forward(t1, p, t1.constant(x));
    t1.backward(sum(t1, reparam_sample(t1, o1.mean, o1.log_std, eps)));
    Tape t2;
    auto o2 = head.forward(t2, p, t2.constant(x));
    t2.backward(sum(t2, o2.mean));
    const Vector g1 = t1.gradient(p);
    const Vector g2 = t2.gradient(p);
    // Mean rows of the last layer feed only the mean.
    const auto& W = p.layout().slice("h/W1");
    for (Eigen::Index c = 0; c < W.cols; ++c)
      for (Eigen::Index r = 0; r < 2; ++r) CHECK(g1(W.offset + c * W.rows + r) == g2(W.offset + c * W.rows + r));
  }
}

TEST_CASE("composite planner then inverse dynamics objective matches finite differences", "[approx]") {
  GaussianHead planner("planner", 4, {16}, 4, true);
  GaussianHead inverse("inv", 8, {16}, 2);
  ParamLayout layout;
  planner.net().add_to(layout);
  inverse.net().add_to(layout);
  ParamVector p(layout);
  Rng rng(21);
  planner.net().init(p, rng);
  inverse.net().init(p, rng);
  const Matrix s = standard_normal(rng, 4, 6);
  const Matrix e1 = standard_normal(rng, 4, 6);
  const Matrix a = standard_normal(rng, 2, 6);
  auto build = [&](Tape& t, const ParamVector& q) {
    Var sv = t.constant(s);
    auto h = planner.forward(t, q, sv);
    Var next = reparam_sample(t, h.mean, h.log_std, e1);
    auto inv = inverse.forward(t, q, concat_rows(t, sv, next));
    return mean(t, gaussian_log_density(t, t.constant(a), inv.mean, inv.log_std));
  };
  const auto r = check_tape_objective(p, build);
  CHECK(r.max_relative_error <= 1e-4);
}

TEST_CASE("categorical head probabilities sum to one", "[approx]") {
  CategoricalHead head("c", 2, {8}, 36);
  ParamLayout layout;
  head.net().add_to(layout);
  ParamVector p(layout);
  Rng rng(8);
  head.net().init(p, rng, 10.0);
  const Matrix probs = head.probs(p, standard_normal(rng, 2, 20));
  for (Eigen::Index j = 0; j < probs.cols(); ++j) CHECK(std::abs(probs.col(j).sum() - 1.0) <= 1e-9);
}

TEST_CASE("backward requires a scalar root", "[approx][tape]") {
  Tape t;
  Var x = t.variable(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(t.backward(x), DimensionError);
  CHECK_THROWS_AS(add(t, x, t.constant(Matrix::Ones(3, 2))), DimensionError);
}

TEST_CASE("adam descends a quadratic", "[approx][adam]") {
  ParamLayout layout;
  layout.add("x", 3, 1);
  ParamVector p(layout);
  p.values() << 1.0, -2.0, 3.0;
  Adam opt(3, {0.05});
  for (int i = 0; i < 2000; ++i) opt.step(p, 2.0 * p.values());
  CHECK(p.values().cwiseAbs().maxCoeff() < 1e-3);
  CHECK_THROWS_AS(opt.step(p, Vector::Zero(2)), DimensionError);
}

TEST_CASE("checkpoints round-trip bit-exactly", "[approx][checkpoint]") {
  Mlp a("planner", {4, {7}, 8});
  Mlp b("q", {6, {5}, 1});
  Checkpoint ck;
  ck.nets.emplace("planner", make_params({&a}, 1));
  ck.nets.emplace("q", make_params({&b}, 2));
  ck.nets.at("q").values()(0) = -0.0;
  ck.nets.at("q").values()(1) = std::numeric_limits<double>::denorm_min();
  ck.meta["variant"] = "depo";
  ck.meta["note"] = "two words";
  std::stringstream ss;
  write_checkpoint(ss, ck);
  const Checkpoint back = read_checkpoint(ss);
  CHECK(back.meta == ck.meta);
  REQUIRE(back.nets.size() == 2);
  CHECK(back.net("planner") == ck.net("planner"));
  CHECK(back.net("q") == ck.net("q"));
  CHECK(std::signbit(back.net("q").values()(0)));

  std::stringstream bad("not-a-checkpoint 1\n");
  CHECK_THROWS_AS(read_checkpoint(bad), FormatError);
  std::stringstream truncated("depo-checkpoint 1\nnet x 1 4\nslice x/W 2 2\n0x1p+0\n");
  CHECK_THROWS_AS(read_checkpoint(truncated), FormatError);
  CHECK_THROWS_AS(ck.net("missing"), FormatError);
}
