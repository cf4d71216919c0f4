#pragma once

// Command implementations behind the depo executable. Each returns a process exit code:
// 0 success, 1 failure or invalid input, 2 usage errors (missing config, unknown suite).

#include "depo/cli/plots.hpp"
#include "depo/trainer/config.hpp"
#include "depo/trainer/runner.hpp"
#include "depo/verify/suites.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace depo::cli {

namespace fs = std::filesystem;
using trainer::Json;

struct RunManifest {
  std::string config_path;
  std::string config_hash;
  std::string output_dir;
  std::string command;
  std::string timestamp;
  std::vector<std::string> artifacts;
  Json config;
  std::uint64_t seed = 0;

  Json to_json() const {
    return {{"config_path", config_path}, {"config_hash", config_hash}, {"output_dir", output_dir}, {"command", command},
            {"timestamp", timestamp},     {"seed", seed},               {"artifacts", artifacts},   {"config", config}};
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// File stem for agent i: plain when the run has one agent, indexed otherwise.
inline std::string agent_stem(const std::string& base, std::size_t i, std::size_t n, const std::string& id) {
  return n == 1 ? base : base + "_" + std::to_string(i) + "_" + id;
}

struct RunArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;  // empty: runs/<name>-seed<seed>
  std::string command_line;
};

inline int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  if (!fs::is_regular_file(args.config_path)) {
    err << "config not found: " << args.config_path << '\n';
    return 2;
  }
  try {
    const std::string bytes = trainer::read_file(args.config_path);
    const std::string hash = trainer::content_hash(bytes);
    auto cfg = trainer::parse_config_text(bytes);
    const std::uint64_t seed = args.seed.value_or(cfg.seed);
    if (!cfg.planner_checkpoint.empty() && fs::path(cfg.planner_checkpoint).is_relative())
      cfg.planner_checkpoint = (fs::path(args.config_path).parent_path() / cfg.planner_checkpoint).string();
    const fs::path dir = args.out.empty() ? fs::path("runs") / (cfg.name + "-seed" + std::to_string(seed)) : fs::path(args.out);
    fs::create_directories(dir);

    out << "running " << cfg.name << " (" << trainer::to_string(cfg.runner) << ", " << trainer::to_string(cfg.variant) << ") seed "
        << seed << '\n';
    const auto result = trainer::run_experiment(cfg, seed, hash);

    RunManifest m;
    m.config_path = args.config_path;
    m.config_hash = hash;
    m.output_dir = dir.string();
    m.command = args.command_line;
    m.timestamp = utc_timestamp();
    m.config = trainer::to_json(cfg);
    m.seed = seed;
    const auto n = result.logs.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& log = result.logs[i];
      const auto metrics = agent_stem("metrics", i, n, log.agent) + ".csv";
      const auto ck = agent_stem("final", i, n, log.agent) + ".ckpt";
      trainer::save_metrics((dir / metrics).string(), log);
      approx::save_checkpoint((dir / ck).string(), result.finals[i]);
      m.artifacts.push_back(metrics);
      m.artifacts.push_back(ck);
      if (!log.empty()) {
        const auto& last = log.last();
        out << log.agent << ": success " << last.success_rate << ", return " << last.mean_return << ", env steps " << last.env_steps
            << '\n';
      }
    }
    m.artifacts.push_back("manifest.json");
    write_text((dir / "manifest.json").string(), m.to_json().dump(2) + "\n");
    out << "wrote " << dir.string() << '\n';
    return 0;
  } catch (const NumericalError& e) {
    err << "aborted: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

inline int cmd_verify(const std::string& suite, std::ostream& out, std::ostream& err) {
  const auto& names = verify::suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end()) {
    err << "unknown suite '" << suite << "'; choose one of";
    for (const auto& s : names) err << ' ' << s;
    err << '\n';
    return 2;
  }
  try {
    const auto report = verify::run_suite(suite);
    for (const auto& c : report.checks) out << verify::format_check(c) << '\n';
    out << suite << ": " << (report.passed() ? "PASS" : "FAIL") << '\n';
    return report.passed() ? 0 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

struct PlotArgs {
  std::vector<std::string> inputs;
  std::string kind = "curves";
  std::string out = ".";
  std::string config;  // heatmap and rollout: config the checkpoint was trained with
  std::uint64_t seed = 0;
  int steps = 20;
};

inline trainer::ExperimentConfig plot_config(const PlotArgs& a, trainer::EnvType want) {
  if (a.config.empty()) throw PreconditionError("--config is required for this kind");
  auto cfg = trainer::load_config(a.config);
  if (cfg.env_type() != want) throw FormatError("config describes the wrong environment for this kind");
  if (!cfg.uses_planner()) throw FormatError("config variant has no state planner");
  return cfg;
}

inline int cmd_plot(const PlotArgs& a, std::ostream& out, std::ostream& err) {
  try {
    if (a.inputs.empty()) throw PreconditionError("no input files given");
    fs::create_directories(a.out);
    const fs::path dir(a.out);
    Table table;
    std::string image;
    if (a.kind == "curves") {
      std::vector<trainer::MetricsLog> logs;
      for (const auto& f : a.inputs) logs.push_back(trainer::load_metrics(f));
      table = curve_table(logs);
      image = curve_svg(table);
    } else if (a.kind == "heatmap") {
      if (a.inputs.size() != 1) throw PreconditionError("heatmap takes one checkpoint");
      const auto cfg = plot_config(a, trainer::EnvType::grid);
      trainer::GridAgent agent(cfg, cfg.agents[0], 0);
      agent.policy().psi() = approx::load_checkpoint(a.inputs[0]).net("planner");
      agent.refresh_planner();
      table = heatmap_table(agent.env(), agent.planner_table());
      image = heatmap_svg(table, agent.env().config().width, agent.env().config().height);
      const auto m = trainer::planner_map(agent.env(), agent.planner_table());
      out << "illegal fraction " << m.illegal_fraction(agent.env()) << ", off-path to path "
          << m.off_path_to_path_fraction(agent.env()) << '\n';
    } else if (a.kind == "rollout") {
      if (a.inputs.size() != 1) throw PreconditionError("rollout takes one checkpoint");
      const auto cfg = plot_config(a, trainer::EnvType::pointmass);
      trainer::PointMassAgent agent(cfg, cfg.agents[0], 0);
      const auto ck = approx::load_checkpoint(a.inputs[0]);
      agent.policy().psi() = ck.net("planner");
      agent.policy().phi() = ck.net("inverse_dynamics");
      Rng rng(a.seed);
      table = rollout_table(agent.policy(), agent.env(), agent.env().sample_start(rng), a.steps);
      image = rollout_svg(table);
    } else {
      err << "unknown plot kind '" << a.kind << "'; choose curves, heatmap or rollout\n";
      return 2;
    }
    write_text((dir / (a.kind + ".csv")).string(), table.csv());
    write_text((dir / (a.kind + ".svg")).string(), image);
    out << "wrote " << (dir / (a.kind + ".svg")).string() << " and " << (dir / (a.kind + ".csv")).string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

inline int cmd_inspect(const std::string& path, std::ostream& out, std::ostream& err) {
  try {
    const auto ck = approx::load_checkpoint(path);
    for (const auto& [k, v] : ck.meta) out << k << " = " << v << '\n';
    for (const auto& [name, p] : ck.nets) {
      out << name << ": " << p.size() << " parameters, norm " << p.values().norm() << (p.all_finite() ? "" : ", NON-FINITE") << '\n';
      for (const auto& s : p.layout().slices()) out << "  " << s.name << " " << s.rows << "x" << s.cols << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace depo::cli
