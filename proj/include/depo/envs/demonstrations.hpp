#pragma once

// Demonstration file:
//
//   depo-demonstrations 1
//   env <id>
//   state_dim <d>
//   count <n>
//   seed <seed>
//   trajectory <length>            (n times, followed by <length> lines)
//   <s_0> ... <s_{d-1}>            (hex floats, one state per line)
//   end

#include "depo/envs/gridworld.hpp"
#include "depo/envs/pointmass.hpp"
#include "depo/errors.hpp"
#include "depo/mdp/finite_mdp.hpp"
#include "depo/random.hpp"

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace depo::envs {

/// State-only trajectories; each is a state_dim x (T+1) matrix with one state per column.
struct Demonstration {
  std::string env_id;
  Eigen::Index state_dim = 0;
  std::uint64_t seed = 0;
  std::vector<Eigen::MatrixXd> trajectories;

  std::size_t count() const { return trajectories.size(); }

  std::size_t n_pairs() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.cols() > 0 ? static_cast<std::size_t>(t.cols() - 1) : 0;
    return n;
  }

  /// All consecutive (s, s') pairs as two state_dim x N matrices.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> pairs() const {
    const auto n = static_cast<Eigen::Index>(n_pairs());
    Eigen::MatrixXd s(state_dim, n), next(state_dim, n);
    Eigen::Index k = 0;
    for (const auto& t : trajectories)
      for (Eigen::Index i = 0; i + 1 < t.cols(); ++i, ++k) {
        s.col(k) = t.col(i);
        next.col(k) = t.col(i + 1);
      }
    return {std::move(s), std::move(next)};
  }

  bool operator==(const Demonstration& o) const {
    if (env_id != o.env_id || state_dim != o.state_dim || seed != o.seed || trajectories.size() != o.trajectories.size())
      return false;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      const auto& a = trajectories[i];
      const auto& b = o.trajectories[i];
      if (a.rows() != b.rows() || a.cols() != b.cols() || !(a.array() == b.array()).all()) return false;
    }
    return true;
  }
};

inline std::string grid_env_id(const GridWorld& gw) { return "grid6x6-k" + std::to_string(gw.k()); }
inline std::string pointmass_env_id(const PointMass& pm) { return "pointmass-" + to_string(pm.config().transform); }

/// Expert episodes from (0,0) until the goal or the horizon; states stored as (x, y).
inline Demonstration collect_grid_demonstrations(const GridWorld& gw, const mdp::TabularPolicy& policy, std::size_t n_traj,
                                                 std::uint64_t seed) {
  if (policy.probs().rows() != gw.n_states() || policy.probs().cols() != gw.n_actions())
    throw DimensionError("policy shape does not match the grid world");
  Demonstration demo{grid_env_id(gw), 2, seed, {}};
  Rng rng(seed);
  for (std::size_t i = 0; i < n_traj; ++i) {
    std::vector<int> states{gw.index({0, 0})};
    for (int t = 0; t < gw.horizon() && states.back() != gw.goal(); ++t) {
      const auto row = policy.probs().row(states.back());
      const int a = static_cast<int>(sample_categorical(rng, row));
      states.push_back(gw.next_state(states.back(), a));
    }
    Eigen::MatrixXd traj(2, static_cast<Eigen::Index>(states.size()));
    for (std::size_t j = 0; j < states.size(); ++j) traj.col(static_cast<Eigen::Index>(j)) = gw.coords(states[j]);
    demo.trajectories.push_back(std::move(traj));
  }
  return demo;
}

using Controller = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Episodes of the full horizon from uniform starts (no early termination, as in training).
inline Demonstration collect_pointmass_demonstrations(const PointMass& env, const Controller& controller, std::size_t n_traj,
                                                      std::uint64_t seed) {
  Demonstration demo{pointmass_env_id(env), PointMass::kStateDim, seed, {}};
  Rng rng(seed);
  for (std::size_t i = 0; i < n_traj; ++i) {
    Eigen::MatrixXd traj(PointMass::kStateDim, env.horizon() + 1);
    traj.col(0) = env.sample_start(rng);
    for (int t = 0; t < env.horizon(); ++t) traj.col(t + 1) = env.step(traj.col(t), controller(traj.col(t)));
    demo.trajectories.push_back(std::move(traj));
  }
  return demo;
}

inline void write_demonstration(std::ostream& out, const Demonstration& demo) {
  out << "depo-demonstrations 1\n";
  out << "env " << demo.env_id << '\n';
  out << "state_dim " << demo.state_dim << '\n';
  out << "count " << demo.trajectories.size() << '\n';
  out << "seed " << demo.seed << '\n';
  out << std::hexfloat;
  for (const auto& t : demo.trajectories) {
    if (t.rows() != demo.state_dim) throw DimensionError("trajectory state dimension differs from the header");
    out << "trajectory " << t.cols() << '\n';
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      for (Eigen::Index i = 0; i < t.rows(); ++i) out << (i ? " " : "") << t(i, j);
      out << '\n';
    }
  }
  out << std::defaultfloat << "end\n";
}

inline Demonstration read_demonstration(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::istringstream {
    if (!std::getline(in, line)) throw FormatError("demonstration file truncated after line " + std::to_string(line_no));
    ++line_no;
    return std::istringstream(line);
  };
  auto expect = [&](const char* key) {
    auto ls = next();
    std::string k, v;
    ls >> k >> v;
    if (k != key || v.empty()) throw FormatError("line " + std::to_string(line_no) + ": expected '" + key + "'");
    return v;
  };
  {
    auto ls = next();
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "depo-demonstrations" || version != 1) throw FormatError("not a demonstration file");
  }
  Demonstration demo;
  demo.env_id = expect("env");
  demo.state_dim = std::stol(expect("state_dim"));
  const auto count = std::stoul(expect("count"));
  demo.seed = std::stoull(expect("seed"));
  if (demo.state_dim <= 0) throw FormatError("state_dim must be positive");
  for (std::size_t i = 0; i < count; ++i) {
    const long len = std::stol(expect("trajectory"));
    if (len < 0) throw FormatError("negative trajectory length");
    Eigen::MatrixXd t(demo.state_dim, len);
    for (long j = 0; j < len; ++j) {
      auto ls = next();
      for (Eigen::Index r = 0; r < demo.state_dim; ++r) {
        std::string tok;
        if (!(ls >> tok)) throw FormatError("line " + std::to_string(line_no) + ": too few values");
        char* end = nullptr;
        t(r, j) = std::strtod(tok.c_str(), &end);
        if (*end != '\0') throw FormatError("line " + std::to_string(line_no) + ": malformed number '" + tok + "'");
      }
      std::string extra;
      if (ls >> extra) throw FormatError("line " + std::to_string(line_no) + ": too many values");
    }
    demo.trajectories.push_back(std::move(t));
  }
  auto ls = next();
  std::string end;
  ls >> end;
  if (end != "end") throw FormatError("line " + std::to_string(line_no) + ": expected 'end'");
  return demo;
}

inline void save_demonstration(const std::string& path, const Demonstration& demo) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write demonstration file '" + path + "'");
  write_demonstration(out, demo);
}

inline Demonstration load_demonstration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open demonstration file '" + path + "'");
  return read_demonstration(in);
}

}  // namespace depo::envs
