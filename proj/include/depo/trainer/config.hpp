#pragma once

// Experiment configuration. JSON documents with nested sections; every section rejects
// keys it does not know. Missing keys keep their defaults.

#include "depo/envs/gridworld.hpp"
#include "depo/envs/pointmass.hpp"
#include "depo/errors.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace depo::trainer {

using Json = nlohmann::json;

enum class Variant { depo, depo_supervised, agnostic_depg, gaifo, gaifo_dp, bco };
enum class Mode { imitation, rl };
enum class Runner { algorithm1, transfer, cotrain };
enum class DepgEstimator { expected, sampled, pathwise, likelihood_ratio };
enum class EnvType { grid, pointmass };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::depo: return "depo";
    case Variant::depo_supervised: return "depo_supervised";
    case Variant::agnostic_depg: return "agnostic_depg";
    case Variant::gaifo: return "gaifo";
    case Variant::gaifo_dp: return "gaifo_dp";
    case Variant::bco: return "bco";
  }
  return "?";
}
inline const char* to_string(Mode m) { return m == Mode::imitation ? "imitation" : "rl"; }
inline const char* to_string(Runner r) {
  switch (r) {
    case Runner::algorithm1: return "algorithm1";
    case Runner::transfer: return "transfer";
    case Runner::cotrain: return "cotrain";
  }
  return "?";
}
inline const char* to_string(DepgEstimator e) {
  switch (e) {
    case DepgEstimator::expected: return "expected";
    case DepgEstimator::sampled: return "sampled";
    case DepgEstimator::pathwise: return "pathwise";
    case DepgEstimator::likelihood_ratio: return "likelihood_ratio";
  }
  return "?";
}

/// One environment instance (one agent in co-training).
struct EnvSpec {
  EnvType type = EnvType::grid;
  envs::GridConfig grid;
  envs::PointMassConfig pointmass;

  std::string id() const {
    return type == EnvType::grid ? "grid-k" + std::to_string(grid.k) : "pointmass-" + envs::to_string(pointmass.transform);
  }
};

struct TrainingConfig {
  int epochs = 100;
  int env_steps_per_epoch = 1000;
  int grad_steps_per_epoch = 1000;
  int warmup_steps = 10000;
  int batch_size = 256;
  int eval_every = 5;
  int eval_episodes = 20;
  int buffer_capacity = 200000;
  int n_demos = 4;
};

struct OptimConfig {
  double lr_q = 3e-4;
  double lr_policy = 3e-4;
  double lr_disc = 3e-4;
  double lr_inverse = 1e-4;
  double tau = 0.005;
};

struct ObjectiveConfig {
  double lambda_h = 0.1;
  double gamma = 0.99;
  double reward_scale = 2.0;
  double gp_weight = 4.0;
  double entropy_weight = 0.2;
  DepgEstimator depg_estimator = DepgEstimator::expected;
  double iw_clip = 50.0;
  double iw_floor = 1e-8;
  int mc_samples = 16;
  bool swap_discriminator_labels = true;  // true: expert toward 1 (standard convention)
};

struct InverseConfig {
  int interval = 10;
  int max_epochs = 200;
  int patience = 5;
  double tol = 1e-5;
  int batches_per_epoch = 10;
};

struct NetworkConfig {
  std::vector<Eigen::Index> planner_hidden{64};
  std::vector<Eigen::Index> inverse_hidden{64};
  std::vector<Eigen::Index> q_hidden{64, 64};
  std::vector<Eigen::Index> disc_hidden{64, 64};
  std::vector<Eigen::Index> policy_hidden{64};
  double planner_residual_scale = 0.05;
  double inverse_delta_scale = 20.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Runner runner = Runner::algorithm1;
  Mode mode = Mode::imitation;
  Variant variant = Variant::depo;
  std::uint64_t seed = 0;
  std::vector<EnvSpec> agents{EnvSpec{}};
  std::string planner_checkpoint;  // transfer runner
  TrainingConfig training;
  OptimConfig optim;
  ObjectiveConfig objective;
  InverseConfig inverse;
  NetworkConfig networks;

  EnvType env_type() const { return agents.at(0).type; }

  bool uses_planner() const { return variant != Variant::gaifo && variant != Variant::bco; }
  bool uses_q() const { return variant != Variant::depo_supervised && variant != Variant::bco; }
  bool uses_discriminator() const { return mode == Mode::imitation && uses_q(); }
  bool trains_inverse_by_likelihood() const { return variant != Variant::gaifo && variant != Variant::gaifo_dp; }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0)) throw InvariantError(std::string(what) + " must be positive");
    };
    positive(optim.lr_q, "lr_q");
    positive(optim.lr_policy, "lr_policy");
    positive(optim.lr_disc, "lr_disc");
    positive(optim.lr_inverse, "lr_inverse");
    if (!(optim.tau > 0.0 && optim.tau <= 1.0)) throw InvariantError("tau must lie in (0, 1]");
    if (!(objective.gamma > 0.0 && objective.gamma < 1.0)) throw InvariantError("gamma must lie in (0, 1)");
    if (objective.lambda_h < 0.0) throw InvariantError("lambda_h must be nonnegative");
    if (objective.gp_weight < 0.0 || objective.entropy_weight < 0.0) throw InvariantError("weights must be nonnegative");
    if (objective.mc_samples < 1) throw InvariantError("mc_samples must be at least 1");
    if (training.epochs < 0 || training.env_steps_per_epoch < 0 || training.grad_steps_per_epoch < 0 || training.warmup_steps < 0)
      throw InvariantError("step budgets must be nonnegative");
    if (training.batch_size < 1 || training.eval_every < 1 || training.eval_episodes < 1 || training.buffer_capacity < 1)
      throw InvariantError("batch size, eval cadence, eval episodes and capacity must be positive");
    if (inverse.interval < 1 || inverse.max_epochs < 0 || inverse.patience < 1 || inverse.batches_per_epoch < 1)
      throw InvariantError("inverse-dynamics schedule must be positive");
    if (agents.empty()) throw InvariantError("at least one environment is required");
    for (const auto& a : agents)
      if (a.type != agents[0].type) throw InvariantError("co-trained agents must share one state space");
    if (runner != Runner::cotrain && agents.size() != 1) throw InvariantError("only the cotrain runner takes several agents");
    if (runner == Runner::cotrain && !uses_planner()) throw InvariantError("co-training needs a decoupled variant");
    if (runner == Runner::transfer && variant != Variant::depo) throw InvariantError("transfer runs the depo variant");
    if (mode == Mode::rl && variant != Variant::depo && variant != Variant::agnostic_depg && variant != Variant::gaifo &&
        variant != Variant::gaifo_dp)
      throw InvariantError("rl mode needs a variant with a Q function");
    const bool grid = env_type() == EnvType::grid;
    if (grid && (objective.depg_estimator == DepgEstimator::pathwise || objective.depg_estimator == DepgEstimator::likelihood_ratio))
      throw InvariantError("grid world uses the expected or sampled estimator");
    if (!grid && (objective.depg_estimator == DepgEstimator::expected || objective.depg_estimator == DepgEstimator::sampled))
      throw InvariantError("point-mass uses the pathwise or likelihood_ratio estimator");
  }
};

namespace detail {

inline void check_keys(const Json& j, const std::string& section, const std::set<std::string>& known) {
  if (!j.is_object()) throw FormatError("config section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw FormatError("unknown config key '" + section + "." + it.key() + "'");
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config key '") + key + "': " + e.what());
  }
}

inline void read_hidden(const Json& j, const char* key, std::vector<Eigen::Index>& out) {
  if (!j.contains(key)) return;
  std::vector<long long> v;
  read(j, key, v);
  out.assign(v.begin(), v.end());
  for (auto h : out)
    if (h < 1) throw FormatError(std::string("config key '") + key + "' needs positive layer widths");
}

template <class E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw FormatError(std::string("unknown ") + what + " '" + s + "'");
}

inline EnvSpec parse_env(const Json& j) {
  check_keys(j, "env", {"type", "k", "horizon", "transform", "dt", "goal_radius", "start_box", "v_max"});
  EnvSpec e;
  std::string type = "grid";
  read(j, "type", type);
  e.type = parse_enum<EnvType>(type, {{"grid", EnvType::grid}, {"pointmass", EnvType::pointmass}}, "env type");
  if (e.type == EnvType::grid) {
    for (const char* k : {"transform", "dt", "goal_radius", "start_box", "v_max"})
      if (j.contains(k)) throw FormatError(std::string("config key 'env.") + k + "' does not apply to the grid world");
    read(j, "k", e.grid.k);
    read(j, "horizon", e.grid.horizon);
  } else {
    if (j.contains("k")) throw FormatError("config key 'env.k' does not apply to the point-mass");
    std::string t = envs::to_string(e.pointmass.transform);
    read(j, "transform", t);
    e.pointmass.transform = envs::parse_action_transform(t);
    read(j, "horizon", e.pointmass.horizon);
    read(j, "dt", e.pointmass.dt);
    read(j, "goal_radius", e.pointmass.goal_radius);
    read(j, "start_box", e.pointmass.start_box);
    read(j, "v_max", e.pointmass.v_max);
  }
  return e;
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  using namespace detail;
  check_keys(j, "<root>",
             {"name", "runner", "mode", "variant", "seed", "env", "agents", "planner_checkpoint", "training", "optim", "objective",
              "inverse", "networks"});
  ExperimentConfig c;
  read(j, "name", c.name);
  std::string s;
  if (j.contains("runner")) {
    read(j, "runner", s);
    c.runner = parse_enum<Runner>(s, {{"algorithm1", Runner::algorithm1}, {"transfer", Runner::transfer}, {"cotrain", Runner::cotrain}},
                                  "runner");
  }
  if (j.contains("mode")) {
    read(j, "mode", s);
    c.mode = parse_enum<Mode>(s, {{"imitation", Mode::imitation}, {"rl", Mode::rl}}, "mode");
  }
  if (j.contains("variant")) {
    read(j, "variant", s);
    c.variant = parse_enum<Variant>(s,
                                    {{"depo", Variant::depo},
                                     {"depo_supervised", Variant::depo_supervised},
                                     {"agnostic_depg", Variant::agnostic_depg},
                                     {"gaifo", Variant::gaifo},
                                     {"gaifo_dp", Variant::gaifo_dp},
                                     {"bco", Variant::bco}},
                                    "variant");
  }
  read(j, "seed", c.seed);
  read(j, "planner_checkpoint", c.planner_checkpoint);
  if (j.contains("env") && j.contains("agents")) throw FormatError("give either 'env' or 'agents', not both");
  if (j.contains("env")) c.agents = {parse_env(j.at("env"))};
  if (j.contains("agents")) {
    if (!j.at("agents").is_array() || j.at("agents").empty()) throw FormatError("'agents' must be a nonempty array");
    c.agents.clear();
    for (const auto& a : j.at("agents")) c.agents.push_back(parse_env(a));
  }
  // Estimator default follows the environment.
  c.objective.depg_estimator = c.env_type() == EnvType::grid ? DepgEstimator::expected : DepgEstimator::pathwise;

  if (j.contains("training")) {
    const auto& t = j.at("training");
    check_keys(t, "training",
               {"epochs", "env_steps_per_epoch", "grad_steps_per_epoch", "warmup_steps", "batch_size", "eval_every", "eval_episodes",
                "buffer_capacity", "n_demos"});
    read(t, "epochs", c.training.epochs);
    read(t, "env_steps_per_epoch", c.training.env_steps_per_epoch);
    read(t, "grad_steps_per_epoch", c.training.grad_steps_per_epoch);
    read(t, "warmup_steps", c.training.warmup_steps);
    read(t, "batch_size", c.training.batch_size);
    read(t, "eval_every", c.training.eval_every);
    read(t, "eval_episodes", c.training.eval_episodes);
    read(t, "buffer_capacity", c.training.buffer_capacity);
    read(t, "n_demos", c.training.n_demos);
  }
  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    check_keys(o, "optim", {"lr_q", "lr_policy", "lr_disc", "lr_inverse", "tau"});
    read(o, "lr_q", c.optim.lr_q);
    read(o, "lr_policy", c.optim.lr_policy);
    read(o, "lr_disc", c.optim.lr_disc);
    read(o, "lr_inverse", c.optim.lr_inverse);
    read(o, "tau", c.optim.tau);
  }
  if (j.contains("objective")) {
    const auto& o = j.at("objective");
    check_keys(o, "objective",
               {"lambda_h", "gamma", "reward_scale", "gp_weight", "entropy_weight", "depg_estimator", "iw_clip", "iw_floor", "mc_samples",
                "swap_discriminator_labels"});
    read(o, "lambda_h", c.objective.lambda_h);
    read(o, "gamma", c.objective.gamma);
    read(o, "reward_scale", c.objective.reward_scale);
    read(o, "gp_weight", c.objective.gp_weight);
    read(o, "entropy_weight", c.objective.entropy_weight);
    read(o, "iw_clip", c.objective.iw_clip);
    read(o, "iw_floor", c.objective.iw_floor);
    read(o, "mc_samples", c.objective.mc_samples);
    read(o, "swap_discriminator_labels", c.objective.swap_discriminator_labels);
    if (o.contains("depg_estimator")) {
      read(o, "depg_estimator", s);
      c.objective.depg_estimator = parse_enum<DepgEstimator>(s,
                                                             {{"expected", DepgEstimator::expected},
                                                              {"sampled", DepgEstimator::sampled},
                                                              {"pathwise", DepgEstimator::pathwise},
                                                              {"likelihood_ratio", DepgEstimator::likelihood_ratio}},
                                                             "depg estimator");
    }
  }
  if (j.contains("inverse")) {
    const auto& o = j.at("inverse");
    check_keys(o, "inverse", {"interval", "max_epochs", "patience", "tol", "batches_per_epoch"});
    read(o, "interval", c.inverse.interval);
    read(o, "max_epochs", c.inverse.max_epochs);
    read(o, "patience", c.inverse.patience);
    read(o, "tol", c.inverse.tol);
    read(o, "batches_per_epoch", c.inverse.batches_per_epoch);
  }
  if (j.contains("networks")) {
    const auto& o = j.at("networks");
    check_keys(o, "networks",
               {"planner_hidden", "inverse_hidden", "q_hidden", "disc_hidden", "policy_hidden", "planner_residual_scale",
                "inverse_delta_scale"});
    read_hidden(o, "planner_hidden", c.networks.planner_hidden);
    read_hidden(o, "inverse_hidden", c.networks.inverse_hidden);
    read_hidden(o, "q_hidden", c.networks.q_hidden);
    read_hidden(o, "disc_hidden", c.networks.disc_hidden);
    read_hidden(o, "policy_hidden", c.networks.policy_hidden);
    read(o, "planner_residual_scale", c.networks.planner_residual_scale);
    read(o, "inverse_delta_scale", c.networks.inverse_delta_scale);
  }
  c.validate();
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config_text(read_file(path)); }

/// Normalized JSON echo of a parsed config (used in run manifests).
inline Json to_json(const ExperimentConfig& c) {
  auto env_json = [](const EnvSpec& e) {
    Json j;
    if (e.type == EnvType::grid) {
      j = {{"type", "grid"}, {"k", e.grid.k}, {"horizon", e.grid.horizon}};
    } else {
      j = {{"type", "pointmass"},
           {"transform", envs::to_string(e.pointmass.transform)},
           {"horizon", e.pointmass.horizon},
           {"dt", e.pointmass.dt},
           {"goal_radius", e.pointmass.goal_radius},
           {"start_box", e.pointmass.start_box},
           {"v_max", e.pointmass.v_max}};
    }
    return j;
  };
  Json agents = Json::array();
  for (const auto& a : c.agents) agents.push_back(env_json(a));
  auto hidden = [](const std::vector<Eigen::Index>& h) { return std::vector<long long>(h.begin(), h.end()); };
  return {{"name", c.name},
          {"runner", to_string(c.runner)},
          {"mode", to_string(c.mode)},
          {"variant", to_string(c.variant)},
          {"seed", c.seed},
          {"agents", agents},
          {"planner_checkpoint", c.planner_checkpoint},
          {"training",
           {{"epochs", c.training.epochs},
            {"env_steps_per_epoch", c.training.env_steps_per_epoch},
            {"grad_steps_per_epoch", c.training.grad_steps_per_epoch},
            {"warmup_steps", c.training.warmup_steps},
            {"batch_size", c.training.batch_size},
            {"eval_every", c.training.eval_every},
            {"eval_episodes", c.training.eval_episodes},
            {"buffer_capacity", c.training.buffer_capacity},
            {"n_demos", c.training.n_demos}}},
          {"optim",
           {{"lr_q", c.optim.lr_q},
            {"lr_policy", c.optim.lr_policy},
            {"lr_disc", c.optim.lr_disc},
            {"lr_inverse", c.optim.lr_inverse},
            {"tau", c.optim.tau}}},
          {"objective",
           {{"lambda_h", c.objective.lambda_h},
            {"gamma", c.objective.gamma},
            {"reward_scale", c.objective.reward_scale},
            {"gp_weight", c.objective.gp_weight},
            {"entropy_weight", c.objective.entropy_weight},
            {"depg_estimator", to_string(c.objective.depg_estimator)},
            {"iw_clip", c.objective.iw_clip},
            {"iw_floor", c.objective.iw_floor},
            {"mc_samples", c.objective.mc_samples},
            {"swap_discriminator_labels", c.objective.swap_discriminator_labels}}},
          {"inverse",
           {{"interval", c.inverse.interval},
            {"max_epochs", c.inverse.max_epochs},
            {"patience", c.inverse.patience},
            {"tol", c.inverse.tol},
            {"batches_per_epoch", c.inverse.batches_per_epoch}}},
          {"networks",
           {{"planner_hidden", hidden(c.networks.planner_hidden)},
            {"inverse_hidden", hidden(c.networks.inverse_hidden)},
            {"q_hidden", hidden(c.networks.q_hidden)},
            {"disc_hidden", hidden(c.networks.disc_hidden)},
            {"policy_hidden", hidden(c.networks.policy_hidden)},
            {"planner_residual_scale", c.networks.planner_residual_scale},
            {"inverse_delta_scale", c.networks.inverse_delta_scale}}}};
}

}  // namespace depo::trainer
