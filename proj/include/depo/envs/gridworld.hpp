#pragma once

#include "depo/errors.hpp"
#include "depo/mdp/finite_mdp.hpp"
#include "depo/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

namespace depo::envs {

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

enum class Direction { up = 0, right = 1, down = 2, left = 3 };

struct GridConfig {
  int width = 6;
  int height = 6;
  int k = 1;  // actions per direction
  std::vector<Cell> shaded_zone{{4, 4}, {4, 5}, {5, 4}, {5, 5}};
  Cell goal{5, 5};
  int horizon = 50;
  // Moves from (0,0): 'R' or 'U' per step. Cells off the path move right until
  // the goal column, then up.
  std::string expert_path = "RRRRRUUUUU";
};

/// The k-fold redundant grid. Action j moves in direction j mod 4; moves that would
/// leave the grid keep the position.
class GridWorld {
 public:
  explicit GridWorld(GridConfig config = {}) : config_(std::move(config)) { validate(); }

  const GridConfig& config() const { return config_; }
  int n_states() const { return config_.width * config_.height; }
  int n_actions() const { return 4 * config_.k; }
  int k() const { return config_.k; }
  int goal() const { return index(config_.goal); }
  int horizon() const { return config_.horizon; }

  int index(Cell c) const { return c.y * config_.width + c.x; }
  Cell cell(int s) const { return {s % config_.width, s / config_.width}; }
  bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < config_.width && c.y < config_.height; }

  static Direction direction(int action) { return static_cast<Direction>(action % 4); }

  static Cell shift(Cell c, Direction d) {
    switch (d) {
      case Direction::up: return {c.x, c.y + 1};
      case Direction::right: return {c.x + 1, c.y};
      case Direction::down: return {c.x, c.y - 1};
      case Direction::left: return {c.x - 1, c.y};
    }
    return c;
  }

  int next_state(int s, int action) const {
    check_state(s);
    if (action < 0 || action >= n_actions()) throw DimensionError("grid action out of range: " + std::to_string(action));
    const Cell n = shift(cell(s), direction(action));
    return inside(n) ? index(n) : s;
  }

  bool is_shaded(int s) const {
    const Cell c = cell(s);
    return std::find(config_.shaded_zone.begin(), config_.shaded_zone.end(), c) != config_.shaded_zone.end();
  }

  /// Cells a start state may be drawn from.
  std::vector<int> start_states() const {
    std::vector<int> out;
    for (int s = 0; s < n_states(); ++s)
      if (!is_shaded(s) && s != goal()) out.push_back(s);
    return out;
  }

  int sample_start(Rng& rng) const {
    const auto starts = start_states();
    return starts[uniform_index(rng, starts.size())];
  }

  /// Legal successor: the cell itself or a 4-neighbor.
  bool is_legal_successor(int s, int next) const {
    const Cell a = cell(s);
    const Cell b = cell(next);
    return std::abs(a.x - b.x) + std::abs(a.y - b.y) <= 1;
  }

  /// Every cell on the expert path, (0,0) first.
  std::vector<int> expert_path_states() const {
    std::vector<int> out{index({0, 0})};
    Cell c{0, 0};
    for (char m : config_.expert_path) {
      c = m == 'R' ? Cell{c.x + 1, c.y} : Cell{c.x, c.y + 1};
      out.push_back(index(c));
    }
    return out;
  }

  /// Direction the expert takes at s.
  Direction expert_direction(int s) const {
    check_state(s);
    const auto path = expert_path_states();
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      if (path[i] == s) return config_.expert_path[i] == 'R' ? Direction::right : Direction::up;
    const Cell c = cell(s);
    if (c.x < config_.goal.x) return Direction::right;
    return Direction::up;
  }

  /// Deterministic expert with its mass split evenly over the k actions of the chosen direction.
  mdp::TabularPolicy expert_policy() const {
    mdp::Matrix probs = mdp::Matrix::Zero(n_states(), n_actions());
    for (int s = 0; s < n_states(); ++s) {
      const int d = static_cast<int>(expert_direction(s));
      for (int j = 0; j < config_.k; ++j) probs(s, d + 4 * j) = 1.0 / config_.k;
    }
    return mdp::TabularPolicy(std::move(probs));
  }

  /// Tabular encoding with state index y*width + x and reward r(s,s') = [s' == goal].
  mdp::FiniteMDP to_finite_mdp(double discount = 0.99) const {
    const int S = n_states();
    const int A = n_actions();
    mdp::Matrix T = mdp::Matrix::Zero(S * A, S);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) T(s * A + a, next_state(s, a)) = 1.0;
    mdp::Vector init = mdp::Vector::Zero(S);
    init(index({0, 0})) = 1.0;
    mdp::Matrix r = mdp::Matrix::Zero(S, S);
    r.col(goal()).setOnes();
    return mdp::FiniteMDP(S, A, std::move(T), std::move(init), discount, std::move(r));
  }

  /// (x, y) scaled to [-1, 1].
  Eigen::Vector2d features(int s) const {
    const Cell c = cell(s);
    return {2.0 * c.x / (config_.width - 1) - 1.0, 2.0 * c.y / (config_.height - 1) - 1.0};
  }

  /// 2 x n_states, column s = features(s).
  Eigen::MatrixXd feature_matrix() const {
    Eigen::MatrixXd f(2, n_states());
    for (int s = 0; s < n_states(); ++s) f.col(s) = features(s);
    return f;
  }

  Eigen::Vector2d coords(int s) const {
    const Cell c = cell(s);
    return {static_cast<double>(c.x), static_cast<double>(c.y)};
  }

 private:
  void check_state(int s) const {
    if (s < 0 || s >= n_states()) throw DimensionError("grid state out of range: " + std::to_string(s));
  }

  void validate() const {
    if (config_.width < 2 || config_.height < 2) throw InvariantError("grid must be at least 2x2");
    if (config_.k < 1) throw InvariantError("redundancy factor k must be >= 1");
    if (config_.horizon < 1) throw InvariantError("grid horizon must be positive");
    if (!inside(config_.goal)) throw InvariantError("goal lies outside the grid");
    for (const auto& c : config_.shaded_zone)
      if (!inside(c)) throw InvariantError("shaded cell lies outside the grid");
    Cell c{0, 0};
    for (char m : config_.expert_path) {
      if (m != 'R' && m != 'U') throw InvariantError("expert path may only contain 'R' and 'U'");
      c = m == 'R' ? Cell{c.x + 1, c.y} : Cell{c.x, c.y + 1};
      if (!inside(c)) throw InvariantError("expert path leaves the grid");
    }
    if (!(c == config_.goal)) throw InvariantError("expert path does not end at the goal");
  }

  GridConfig config_;
};

}  // namespace depo::envs
