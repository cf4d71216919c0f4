#include "depo/cli/commands.hpp"
#include "depo/trainer/analysis.hpp"
#include "depo/trainer/config.hpp"
#include "depo/trainer/runner.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>
#include <sstream>

using namespace depo;
using namespace depo::trainer;
namespace fs = std::filesystem;

namespace {

const char* kSmallGrid = R"({
  "name": "small_grid",
  "variant": "depo",
  "env": {"type": "grid", "k": 1, "horizon": 50},
  "training": {"epochs": 4, "env_steps_per_epoch": 100, "grad_steps_per_epoch": 20, "warmup_steps": 300,
               "batch_size": 32, "eval_every": 2, "eval_episodes": 5, "buffer_capacity": 10000, "n_demos": 2},
  "optim": {"lr_q": 0.05, "lr_policy": 0.01, "lr_disc": 0.05, "lr_inverse": 0.01, "tau": 0.05},
  "objective": {"lambda_h": 1.0, "gamma": 0.9, "entropy_weight": 0.01},
  "inverse": {"interval": 2, "max_epochs": 5}
})";

ExperimentConfig small_grid() { return parse_config_text(kSmallGrid); }

std::string bytes_of(const MetricsLog& log) {
  std::ostringstream out;
  write_metrics(out, log);
  return out.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("depo_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

// ---- replay buffer ---------------------------------------------------------------------------

TEST_CASE("replay buffer evicts oldest first", "[trainer]") {
  ReplayBuffer<int> b(3);
  for (int i = 0; i < 5; ++i) b.push(i);
  CHECK(b.size() == 3);
  CHECK(b.pushed() == 5);
  CHECK(b.at(0) == 2);
  CHECK(b.at(1) == 3);
  CHECK(b.at(2) == 4);
  CHECK_THROWS_AS(b.at(3), PreconditionError);
  CHECK_THROWS_AS(ReplayBuffer<int>(0), InvariantError);
}

TEST_CASE("replay sampling returns distinct indices", "[trainer]") {
  Rng rng(5);
  for (std::size_t n : {0u, 1u, 7u, 20u}) {
    const auto idx = sample_distinct(n, 20, rng);
    CHECK(idx.size() == n);
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == n);
    for (auto i : idx) CHECK(i < 20);
  }
  CHECK_THROWS_AS(sample_distinct(21, 20, rng), PreconditionError);
}

// ---- config ----------------------------------------------------------------------------------

TEST_CASE("config rejects unknown keys and bad values", "[trainer][config]") {
  CHECK_NOTHROW(small_grid());
  CHECK_THROWS_AS(parse_config_text(R"({"trainng": {}})"), FormatError);
  CHECK_THROWS_AS(parse_config_text(R"({"optim": {"lr": 0.1}})"), FormatError);
  CHECK_THROWS_AS(parse_config_text(R"({"variant": "ppo"})"), FormatError);
  CHECK_THROWS_AS(parse_config_text(R"({"objective": {"gamma": 1.0}})"), InvariantError);
  CHECK_THROWS_AS(parse_config_text("{not json"), FormatError);
  CHECK_THROWS_AS(parse_config_text(R"({"env": {"type": "grid"}, "objective": {"depg_estimator": "pathwise"}})"), InvariantError);
}

// ---- metrics ---------------------------------------------------------------------------------

TEST_CASE("content hash is the git blob id", "[trainer][metrics]") {
  CHECK(content_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("metrics table round trips", "[trainer][metrics]") {
  MetricsLog log;
  log.agent = "grid-k1";
  log.seed = 7;
  log.config_hash = content_hash("x");
  MetricsRow r;
  r.epoch = 3;
  r.env_steps = 1200;
  r.mean_return = 0.1 + 0.2;
  r.success_rate = 0.75;
  r.q_loss = 1e-300;
  r.planner_updates = 42;
  log.rows = {MetricsRow{}, r};
  const std::string text = bytes_of(log);
  std::istringstream in(text);
  const auto back = read_metrics(in);
  CHECK(back.agent == log.agent);
  CHECK(back.seed == 7);
  CHECK(back.config_hash == log.config_hash);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].mean_return == r.mean_return);
  CHECK(back.rows[1].q_loss == r.q_loss);
  CHECK(std::isnan(back.rows[1].disc_loss));
  CHECK(back.rows[1].planner_updates == 42);
  CHECK(bytes_of(back) == text);
}

TEST_CASE("steps to success reports the first qualifying row", "[trainer][metrics]") {
  MetricsLog log;
  for (auto [steps, rate] : {std::pair{100L, 0.2}, {200L, 0.95}, {300L, 1.0}}) {
    MetricsRow r;
    r.env_steps = steps;
    r.success_rate = rate;
    log.rows.push_back(r);
  }
  CHECK(log.steps_to_success(0.9) == 200);
  CHECK(log.steps_to_success(1.0) == 300);
  log.rows.pop_back();
  CHECK(log.steps_to_success(1.0) == -1);
}

// ---- runners ---------------------------------------------------------------------------------

TEST_CASE("zero epochs produce an empty log", "[trainer][runner]") {
  auto cfg = small_grid();
  cfg.training.epochs = 0;
  const auto run = run_algorithm1(cfg, 1);
  REQUIRE(run.logs.size() == 1);
  CHECK(run.logs[0].empty());
  CHECK(run.final_planner == run.initial_planner);
}

TEST_CASE("identical config and seed give byte-identical metrics", "[trainer][runner]") {
  const auto cfg = small_grid();
  const auto a = run_algorithm1(cfg, 3, "h");
  const auto b = run_algorithm1(cfg, 3, "h");
  CHECK(bytes_of(a.logs[0]) == bytes_of(b.logs[0]));
  CHECK(a.final_planner == b.final_planner);
  const auto c = run_algorithm1(cfg, 4, "h");
  CHECK(bytes_of(a.logs[0]) != bytes_of(c.logs[0]));
}

TEST_CASE("metric rows follow the evaluation cadence", "[trainer][runner]") {
  auto cfg = small_grid();
  cfg.training.epochs = 5;
  const auto run = run_algorithm1(cfg, 2);
  std::vector<int> epochs;
  for (const auto& r : run.logs[0].rows) epochs.push_back(r.epoch);
  CHECK(epochs == std::vector<int>{0, 2, 4, 5});
  CHECK(run.logs[0].rows.front().env_steps == 300);
  CHECK(run.logs[0].rows.back().env_steps == 300 + 5 * 100);
  CHECK(run.logs[0].rows.back().planner_updates == 5 * 20);
}

TEST_CASE("variants update only their own components", "[trainer][runner]") {
  auto cfg = small_grid();
  SECTION("gaifo never touches the planner") {
    cfg.variant = Variant::gaifo;
    const auto run = run_algorithm1(cfg, 1);
    const auto& last = run.logs[0].last();
    CHECK(last.planner_updates == 0);
    CHECK(last.disc_updates > 0);
    CHECK(last.q_updates > 0);
    CHECK(run.final_planner == run.initial_planner);
    CHECK(run.finals[0].nets.count("planner") == 0);
  }
  SECTION("bco trains no discriminator and no critic") {
    cfg.variant = Variant::bco;
    const auto run = run_algorithm1(cfg, 1);
    const auto& last = run.logs[0].last();
    CHECK(last.disc_updates == 0);
    CHECK(last.q_updates == 0);
    CHECK(last.planner_updates == 0);
    CHECK(last.inverse_updates > 0);
    CHECK(std::isnan(last.disc_loss));
  }
  SECTION("rl mode trains no discriminator") {
    cfg.mode = Mode::rl;
    const auto run = rl_mode_run(cfg, 1);
    const auto& last = run.logs[0].last();
    CHECK(last.disc_updates == 0);
    CHECK(last.q_updates > 0);
    CHECK(last.planner_updates > 0);
    CHECK(run.finals[0].nets.count("discriminator") == 0);
  }
  SECTION("supervised variant trains no critic") {
    cfg.variant = Variant::depo_supervised;
    const auto run = run_algorithm1(cfg, 1);
    CHECK(run.logs[0].last().q_updates == 0);
    CHECK(run.logs[0].last().planner_updates > 0);
  }
}

TEST_CASE("transfer keeps the loaded planner bitwise", "[trainer][runner]") {
  const auto pre = run_algorithm1(small_grid(), 1);
  auto cfg = small_grid();
  cfg.runner = Runner::transfer;
  cfg.agents[0].grid.k = 4;
  const auto t = transfer_run(cfg, pre.finals[0], 2);
  CHECK(t.initial_planner == pre.final_planner);
  CHECK(t.final_planner == pre.final_planner);
  CHECK(t.finals[0].net("planner") == pre.final_planner);
  CHECK(t.logs[0].last().planner_updates == 0);
  CHECK(t.logs[0].last().inverse_updates > 0);
  CHECK(t.finals[0].net("inverse_dynamics").size() != pre.finals[0].net("inverse_dynamics").size());
}

TEST_CASE("transfer rejects a planner from another state space", "[trainer][runner]") {
  ExperimentConfig pm;
  pm.agents[0].type = EnvType::pointmass;
  pm.objective.depg_estimator = DepgEstimator::pathwise;
  pm.training.epochs = 0;
  pm.training.n_demos = 1;
  pm.validate();
  const auto src = run_algorithm1(pm, 1);
  auto cfg = small_grid();
  cfg.runner = Runner::transfer;
  CHECK_THROWS_AS(transfer_run(cfg, src.finals[0], 1), DimensionError);
  approx::Checkpoint empty;
  CHECK_THROWS_AS(transfer_run(cfg, empty, 1), FormatError);
}

TEST_CASE("co-training applies the mean of the agent gradients", "[trainer][runner]") {
  auto cfg = small_grid();
  cfg.runner = Runner::cotrain;
  cfg.training.epochs = 2;
  EnvSpec k2 = cfg.agents[0];
  k2.grid.k = 2;
  EnvSpec k4 = cfg.agents[0];
  k4.grid.k = 4;
  cfg.agents = {cfg.agents[0], k2, k4};
  cfg.validate();
  long steps = 0;
  bool equal = true;
  RunOptions opt;
  opt.on_planner_step = [&](const std::vector<Vector>& g, const Vector& applied) {
    REQUIRE(g.size() == 3);
    const Vector expect = ((g[0] + g[1]) + g[2]) / 3.0;
    equal = equal && expect == applied;
    ++steps;
  };
  const auto run = cotrain_run(cfg, 9, {}, opt);
  CHECK(equal);
  CHECK(steps == 2 * 20);
  REQUIRE(run.logs.size() == 3);
  std::set<std::string> ids;
  for (const auto& l : run.logs) ids.insert(l.agent);
  CHECK(ids == std::set<std::string>{"grid-k1", "grid-k2", "grid-k4"});
  for (const auto& f : run.finals) CHECK(f.net("planner") == run.final_planner);
}

TEST_CASE("co-training with one agent equals the single-agent run", "[trainer][runner]") {
  const auto cfg = small_grid();
  const auto a = run_algorithm1(cfg, 5);
  const auto b = cotrain_run(cfg, 5);
  CHECK(bytes_of(a.logs[0]) == bytes_of(b.logs[0]));
  CHECK(a.final_planner == b.final_planner);
}

TEST_CASE("mean gradient of one agent is that agent's gradient", "[trainer][runner]") {
  Vector g(3);
  g << 0.1, -1e-17, 3.0;
  CHECK(mean_gradient({g}) == g);
  Vector h(3);
  h << 0.2, 1.0, -3.0;
  const Vector m = mean_gradient({g, h});
  CHECK(m == Vector((g + h) / 2.0));
  CHECK_THROWS_AS(mean_gradient({}), PreconditionError);
  CHECK_THROWS_AS(mean_gradient({g, Vector(2)}), DimensionError);
}

TEST_CASE("soft TD steps converge to exact policy evaluation", "[trainer][oracle]") {
  auto cfg = small_grid();
  cfg.mode = Mode::rl;
  cfg.objective.entropy_weight = 0.0;
  cfg.optim.lr_q = 0.0002;
  cfg.optim.tau = 1.0;
  cfg.training.batch_size = 128;
  cfg.validate();
  GridAgent agent(cfg, cfg.agents[0], 11);
  agent.collect(5000, true);
  for (int i = 0; i < 80000; ++i) {
    agent.begin_step();
    agent.update_q();
  }
  // Exact evaluation of the fixed composed policy: (I - gamma M) q = r over state-action pairs.
  const auto& gw = agent.env();
  const Matrix pi = decoupled::TabularDecoupledPolicy::compose(agent.planner_table(), agent.inverse_table());
  const int S = gw.n_states(), A = gw.n_actions();
  Matrix M = Matrix::Zero(S * A, S * A);
  Vector r = Vector::Zero(S * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const int n = gw.next_state(s, a);
      if (n == gw.goal()) {
        r(s * A + a) = 1.0;
        continue;
      }
      for (int b = 0; b < A; ++b) M(s * A + a, n * A + b) = pi(n, b);
    }
  const Vector q = (Matrix::Identity(S * A, S * A) - cfg.objective.gamma * M).partialPivLu().solve(r);
  const Matrix learned = agent.q().table();
  double worst = 0.0;
  for (int s = 0; s < S; ++s) {
    if (s == gw.goal()) continue;
    for (int a = 0; a < A; ++a) worst = std::max(worst, std::abs(learned(s, a) - q(s * A + a)));
  }
  CHECK(worst < 1e-3);
}

// ---- analysis --------------------------------------------------------------------------------

TEST_CASE("tabular rollout follows argmax predictions", "[trainer][analysis]") {
  const envs::GridWorld gw;
  CHECK(multi_step_rollout(Matrix::Identity(36, 36), 4, 0) == std::vector<int>{4});
  CHECK_THROWS_AS(multi_step_rollout(Matrix::Identity(36, 36), 4, -1), PreconditionError);
  CHECK_THROWS_AS(multi_step_rollout(Matrix::Identity(36, 36), 36, 1), PreconditionError);
  // The expert's transition table reproduces the expert path from its first cell.
  const auto path = gw.expert_path_states();
  Matrix table = Matrix::Zero(36, 36);
  for (int s = 0; s < 36; ++s) table(s, s == gw.goal() ? s : gw.next_state(s, static_cast<int>(gw.expert_direction(s)))) = 1.0;
  const auto roll = multi_step_rollout(table, path.front(), static_cast<int>(path.size()) - 1);
  CHECK(roll == path);
}

TEST_CASE("planner map classifies legality and path hits", "[trainer][analysis]") {
  const envs::GridWorld gw;
  Matrix stay = Matrix::Identity(36, 36);
  const auto m = planner_map(gw, stay);
  CHECK(m.illegal_fraction(gw) == 0.0);
  CHECK(m.off_path_to_path_fraction(gw) == 0.0);
  Matrix jump = Matrix::Zero(36, 36);
  jump.col(gw.goal()).setOnes();
  const auto j = planner_map(gw, jump);
  CHECK(j.off_path_to_path_fraction(gw) == 1.0);
  CHECK(j.illegal_fraction(gw) > 0.5);
  CHECK_THROWS_AS(planner_map(gw, Matrix::Identity(5, 5)), DimensionError);
}

TEST_CASE("planner mse recomputes from recorded transitions", "[trainer][analysis]") {
  std::vector<Vector> p{Vector::Zero(2), Vector::Ones(2)};
  std::vector<Vector> q{Vector::Ones(2), Vector::Ones(2)};
  CHECK(planner_mse(p, q) == 1.0);
  CHECK_THROWS_AS(planner_mse({}, {}), PreconditionError);
  CHECK_THROWS_AS(planner_mse(p, {q[0]}), DimensionError);
}

// ---- command line ----------------------------------------------------------------------------

TEST_CASE("run command writes metrics, manifest and checkpoint", "[cli]") {
  const auto dir = scratch_dir("run");
  const auto cfg_path = (dir / "small.json").string();
  cli::write_text(cfg_path, kSmallGrid);
  std::ostringstream out, err;
  cli::RunArgs args{cfg_path, 3, (dir / "a").string(), "depo run"};
  REQUIRE(cli::cmd_run(args, out, err) == 0);
  CHECK(fs::exists(dir / "a" / "metrics.csv"));
  CHECK(fs::exists(dir / "a" / "final.ckpt"));
  const auto manifest = Json::parse(read_file((dir / "a" / "manifest.json").string()));
  CHECK(manifest.at("config_hash") == content_hash(kSmallGrid));
  for (const auto& f : manifest.at("artifacts")) CHECK(fs::exists(dir / "a" / f.get<std::string>()));
  CHECK(load_metrics((dir / "a" / "metrics.csv").string()).config_hash == content_hash(kSmallGrid));

  args.out = (dir / "b").string();
  REQUIRE(cli::cmd_run(args, out, err) == 0);
  CHECK(read_file((dir / "a" / "metrics.csv").string()) == read_file((dir / "b" / "metrics.csv").string()));

  std::ostringstream inspect;
  CHECK(cli::cmd_inspect((dir / "a" / "final.ckpt").string(), inspect, err) == 0);
  CHECK(inspect.str().find("planner") != std::string::npos);

  SECTION("plots from run outputs") {
    cli::PlotArgs p;
    p.inputs = {(dir / "a" / "metrics.csv").string(), (dir / "b" / "metrics.csv").string()};
    p.out = (dir / "plots").string();
    CHECK(cli::cmd_plot(p, out, err) == 0);
    const auto curve = read_file((dir / "plots" / "curves.csv").string());
    CHECK(curve.rfind("env_steps,success_mean,success_std", 0) == 0);
    p.kind = "heatmap";
    p.inputs = {(dir / "a" / "final.ckpt").string()};
    p.config = cfg_path;
    CHECK(cli::cmd_plot(p, out, err) == 0);
    CHECK(fs::exists(dir / "plots" / "heatmap.svg"));
    p.kind = "radar";
    CHECK(cli::cmd_plot(p, out, err) == 2);
  }
}

TEST_CASE("run command reports missing and invalid configs", "[cli]") {
  std::ostringstream out, err;
  CHECK(cli::cmd_run({"/nonexistent/config.json", {}, {}, {}}, out, err) == 2);
  CHECK(err.str().find("config not found") != std::string::npos);
  const auto dir = scratch_dir("bad");
  cli::write_text((dir / "bad.json").string(), R"({"unknown_key": 1})");
  CHECK(cli::cmd_run({(dir / "bad.json").string(), {}, (dir / "o").string(), {}}, out, err) == 1);
}

TEST_CASE("verify command exit codes", "[cli]") {
  std::ostringstream out, err;
  CHECK(cli::cmd_verify("occupancy", out, err) == 0);
  CHECK(out.str().find("PASS") != std::string::npos);
  CHECK(cli::cmd_verify("nonsense", out, err) == 2);
}

TEST_CASE("plot command needs inputs", "[cli]") {
  std::ostringstream out, err;
  cli::PlotArgs p;
  p.out = scratch_dir("plot_empty").string();
  CHECK(cli::cmd_plot(p, out, err) == 1);
  CHECK_THROWS_AS(cli::curve_table({}), PreconditionError);
}
