#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dnmd/env.hpp"
#include "dnmd/rng.hpp"

namespace dnmd {

struct PursuitConfig {
  int n_pursuers = 6;
  int m_evaders = 2;
  int sense_range = 3;  // D; observation window is (2D+1) x (2D+1)
  int width = 15;
  int height = 15;
  double r_capture = 5.0;   // R+ to each capturing pursuer
  double r_step = 0.05;     // R1- per time step, all pursuers
  double r_boundary = 0.5;  // R2- for hitting the map boundary
  int horizon = 500;        // T
};

/// Gridworld pursuit. Pursuers are the learning agents; evaders move
/// uniformly at random and are captured when all four sides are blocked by
/// pursuers or map boundaries.
///
/// Actions: 0 North (+y), 1 East (+x), 2 West (-x), 3 South (-y), 4 Stay.
class PursuitEnv final : public DiscreteEnv {
 public:
  struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
  };

  explicit PursuitEnv(const PursuitConfig& cfg) : cfg_(cfg), rng_(0) {
    if (cfg.n_pursuers <= 0 || cfg.m_evaders <= 0 || cfg.sense_range <= 0 || cfg.horizon <= 0)
      throw std::invalid_argument("pursuit: counts and ranges must be positive");
    if (cfg.width * cfg.height < cfg.n_pursuers + cfg.m_evaders)
      throw std::invalid_argument("pursuit: map too small for all entities");
  }

  void reset(std::uint64_t seed) override {
    rng_ = Rng(splitmix64(seed));
    t_ = 0;
    last_captured_.clear();
    place_evaders_at_center();
    place_pursuers_randomly();
  }

  EnvStep step(const std::vector<int>& joint_action) override {
    if (static_cast<int>(joint_action.size()) != cfg_.n_pursuers)
      throw std::invalid_argument("pursuit: one action per pursuer required");
    for (int a : joint_action)
      if (a < 0 || a >= kNumActions) throw std::invalid_argument("pursuit: invalid action id");

    ++t_;
    move_evaders();

    std::vector<bool> hit_boundary(static_cast<std::size_t>(cfg_.n_pursuers), false);
    move_pursuers(joint_action, hit_boundary);

    EnvStep result;
    result.rewards.assign(static_cast<std::size_t>(cfg_.n_pursuers), -cfg_.r_step);
    for (int i = 0; i < cfg_.n_pursuers; ++i)
      if (hit_boundary[static_cast<std::size_t>(i)])
        result.rewards[static_cast<std::size_t>(i)] -= cfg_.r_boundary;

    result.captures = resolve_captures(result.rewards);
    result.terminal = evaders_.empty() || t_ >= cfg_.horizon;
    result.observations.reserve(static_cast<std::size_t>(cfg_.n_pursuers));
    for (int i = 0; i < cfg_.n_pursuers; ++i) result.observations.push_back(observe(i));
    return result;
  }

  /// Three stacked binary windows centered on the agent, each (2D+1)^2 and
  /// row-major in (dy, dx): other pursuers, evaders, map boundary (cells
  /// outside the map).
  std::vector<double> observe(int agent) const override {
    const int side = window_side();
    const int area = side * side;
    std::vector<double> obs(static_cast<std::size_t>(3 * area), 0.0);
    const Cell me = pursuers_[static_cast<std::size_t>(agent)];
    const int d = cfg_.sense_range;

    const auto window_index = [&](const Cell& c) -> int {
      const int dx = c.x - me.x;
      const int dy = c.y - me.y;
      if (dx < -d || dx > d || dy < -d || dy > d) return -1;
      return (dy + d) * side + (dx + d);
    };

    for (int j = 0; j < cfg_.n_pursuers; ++j) {
      if (j == agent) continue;
      const int w = window_index(pursuers_[static_cast<std::size_t>(j)]);
      if (w >= 0) obs[static_cast<std::size_t>(w)] = 1.0;
    }
    for (const Cell& e : evaders_) {
      const int w = window_index(e);
      if (w >= 0) obs[static_cast<std::size_t>(area + w)] = 1.0;
    }
    for (int dy = -d; dy <= d; ++dy) {
      for (int dx = -d; dx <= d; ++dx) {
        const Cell c{me.x + dx, me.y + dy};
        if (!in_map(c))
          obs[static_cast<std::size_t>(2 * area + (dy + d) * side + (dx + d))] = 1.0;
      }
    }
    return obs;
  }

  int num_agents() const override { return cfg_.n_pursuers; }
  int obs_dim() const override { return 3 * window_side() * window_side(); }
  int num_actions() const override { return kNumActions; }
  int step_count() const override { return t_; }
  std::pair<double, double> agent_position(int agent) const override {
    const Cell& c = pursuers_[static_cast<std::size_t>(agent)];
    return {static_cast<double>(c.x), static_cast<double>(c.y)};
  }

  const PursuitConfig& config() const { return cfg_; }
  const std::vector<Cell>& pursuer_cells() const { return pursuers_; }
  const std::vector<Cell>& evader_cells() const { return evaders_; }
  int evaders_remaining() const { return static_cast<int>(evaders_.size()); }

  /// Cells of the evaders captured by the most recent step.
  const std::vector<Cell>& last_captured() const { return last_captured_; }

  /// Debug/test hook: overwrite entity positions (must be distinct, in-map).
  void set_state(const std::vector<Cell>& pursuers, const std::vector<Cell>& evaders) {
    if (static_cast<int>(pursuers.size()) != cfg_.n_pursuers)
      throw std::invalid_argument("pursuit: wrong pursuer count");
    for (const Cell& c : pursuers)
      if (!in_map(c)) throw std::invalid_argument("pursuit: position out of map");
    for (const Cell& c : evaders)
      if (!in_map(c)) throw std::invalid_argument("pursuit: position out of map");
    std::vector<Cell> all = pursuers;
    all.insert(all.end(), evaders.begin(), evaders.end());
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (all[i] == all[j]) throw std::invalid_argument("pursuit: overlapping entities");
    pursuers_ = pursuers;
    evaders_ = evaders;
  }

  /// Capture predicate: every side of the cell is off-map or holds a
  /// pursuer. Exposed so tests can cross-check step() against it.
  static bool is_captured(const Cell& evader, const std::vector<Cell>& pursuers, int width,
                          int height) {
    for (int a = 0; a < 4; ++a) {
      const Cell side{evader.x + kDx[a], evader.y + kDy[a]};
      if (side.x < 0 || side.x >= width || side.y < 0 || side.y >= height) continue;
      if (std::find(pursuers.begin(), pursuers.end(), side) == pursuers.end()) return false;
    }
    return true;
  }

  static constexpr int kNumActions = 5;

 private:
  static constexpr int kDx[kNumActions] = {0, 1, -1, 0, 0};
  static constexpr int kDy[kNumActions] = {1, 0, 0, -1, 0};

  int window_side() const { return 2 * cfg_.sense_range + 1; }
  bool in_map(const Cell& c) const {
    return c.x >= 0 && c.x < cfg_.width && c.y >= 0 && c.y < cfg_.height;
  }
  bool occupied(const Cell& c) const {
    return std::find(pursuers_.begin(), pursuers_.end(), c) != pursuers_.end() ||
           std::find(evaders_.begin(), evaders_.end(), c) != evaders_.end();
  }

  /// The M cells nearest the exact map center, ties broken by (y, x).
  void place_evaders_at_center() {
    const double cx = (cfg_.width - 1) / 2.0;
    const double cy = (cfg_.height - 1) / 2.0;
    std::vector<Cell> cells;
    cells.reserve(static_cast<std::size_t>(cfg_.width * cfg_.height));
    for (int y = 0; y < cfg_.height; ++y)
      for (int x = 0; x < cfg_.width; ++x) cells.push_back({x, y});
    std::stable_sort(cells.begin(), cells.end(), [&](const Cell& a, const Cell& b) {
      const double da = (a.x - cx) * (a.x - cx) + (a.y - cy) * (a.y - cy);
      const double db = (b.x - cx) * (b.x - cx) + (b.y - cy) * (b.y - cy);
      if (da != db) return da < db;
      if (a.y != b.y) return a.y < b.y;
      return a.x < b.x;
    });
    evaders_.assign(cells.begin(), cells.begin() + cfg_.m_evaders);
  }

  void place_pursuers_randomly() {
    std::vector<Cell> free;
    free.reserve(static_cast<std::size_t>(cfg_.width * cfg_.height));
    for (int y = 0; y < cfg_.height; ++y)
      for (int x = 0; x < cfg_.width; ++x) {
        const Cell c{x, y};
        if (std::find(evaders_.begin(), evaders_.end(), c) == evaders_.end()) free.push_back(c);
      }
    pursuers_.clear();
    for (int i = 0; i < cfg_.n_pursuers; ++i) {
      const int pick = rng_.uniform_int(static_cast<int>(free.size()));
      pursuers_.push_back(free[static_cast<std::size_t>(pick)]);
      free.erase(free.begin() + pick);
    }
  }

  /// Evaders pick uniformly among the five actions and stay whenever the
  /// target cell is off-map or occupied.
  void move_evaders() {
    for (Cell& e : evaders_) {
      const int a = rng_.uniform_int(kNumActions);
      if (a == 4) continue;
      const Cell target{e.x + kDx[a], e.y + kDy[a]};
      if (!in_map(target) || occupied(target)) continue;
      e = target;
    }
  }

  /// Pursuers move one at a time in a randomized order; the first to claim a
  /// cell wins, later contenders stay. Off-map moves stay and are flagged.
  void move_pursuers(const std::vector<int>& actions, std::vector<bool>& hit_boundary) {
    std::vector<int> order(static_cast<std::size_t>(cfg_.n_pursuers));
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);
    for (int i : order) {
      const int a = actions[static_cast<std::size_t>(i)];
      if (a == 4) continue;
      Cell& me = pursuers_[static_cast<std::size_t>(i)];
      const Cell target{me.x + kDx[a], me.y + kDy[a]};
      if (!in_map(target)) {
        hit_boundary[static_cast<std::size_t>(i)] = true;
        continue;
      }
      if (occupied(target)) continue;
      me = target;
    }
  }

  /// An evader is captured when all four sides are off-map or hold a
  /// pursuer; every adjacent pursuer earns the capture reward. Checked
  /// simultaneously for all evaders, then removals applied.
  int resolve_captures(std::vector<double>& rewards) {
    std::vector<std::size_t> captured;
    last_captured_.clear();
    for (std::size_t e = 0; e < evaders_.size(); ++e)
      if (is_captured(evaders_[e], pursuers_, cfg_.width, cfg_.height)) captured.push_back(e);
    for (std::size_t e : captured) {
      const Cell& c = evaders_[e];
      last_captured_.push_back(c);
      for (int i = 0; i < cfg_.n_pursuers; ++i) {
        const Cell& p = pursuers_[static_cast<std::size_t>(i)];
        const int dist = std::abs(p.x - c.x) + std::abs(p.y - c.y);
        if (dist == 1) rewards[static_cast<std::size_t>(i)] += cfg_.r_capture;
      }
    }
    for (auto it = captured.rbegin(); it != captured.rend(); ++it)
      evaders_.erase(evaders_.begin() + static_cast<std::ptrdiff_t>(*it));
    return static_cast<int>(captured.size());
  }

  PursuitConfig cfg_;
  Rng rng_;
  int t_ = 0;
  std::vector<Cell> pursuers_;
  std::vector<Cell> evaders_;
  std::vector<Cell> last_captured_;
};

}  // namespace dnmd
