#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dnmd/env.hpp"
#include "dnmd/rng.hpp"

namespace dnmd {

struct NavConfig {
  int n_agents = 8;
  int n_landmarks = 8;
  double sense_radius = 1.0;  // D; other agents visible only within this
  double r_collision = 2.0;   // R2-
  double dt = 0.1;
  int horizon = 100;
  double half_width = 1.5;
  double damping = 0.25;
  double agent_radius = 0.1;
  double accel = 1.0;
};

/// Cooperative navigation: N agents cover L landmarks while avoiding
/// collisions. Double-integrator physics with velocity damping; per-agent
/// reward is minus the distance to the nearest landmark, minus a collision
/// penalty per overlapping pair.
///
/// Actions: 0 no-op, 1 +x, 2 -x, 3 +y, 4 -y unit accelerations.
class NavEnv final : public DiscreteEnv {
 public:
  struct Vec2 {
    double x = 0.0;
    double y = 0.0;
  };

  explicit NavEnv(const NavConfig& cfg) : cfg_(cfg), rng_(0) {
    if (cfg.n_agents <= 0 || cfg.n_landmarks <= 0)
      throw std::invalid_argument("nav: agent and landmark counts must be positive");
    if (cfg.horizon <= 0 || cfg.dt <= 0.0 || cfg.half_width <= 0.0)
      throw std::invalid_argument("nav: horizon, dt, half_width must be positive");
  }

  void reset(std::uint64_t seed) override {
    rng_ = Rng(splitmix64(seed));
    t_ = 0;
    pos_.resize(static_cast<std::size_t>(cfg_.n_agents));
    vel_.assign(static_cast<std::size_t>(cfg_.n_agents), Vec2{});
    landmarks_.resize(static_cast<std::size_t>(cfg_.n_landmarks));
    for (Vec2& p : pos_) p = {rng_.uniform(-1.0, 1.0), rng_.uniform(-1.0, 1.0)};
    for (Vec2& l : landmarks_) l = {rng_.uniform(-1.0, 1.0), rng_.uniform(-1.0, 1.0)};
  }

  EnvStep step(const std::vector<int>& joint_action) override {
    if (static_cast<int>(joint_action.size()) != cfg_.n_agents)
      throw std::invalid_argument("nav: one action per agent required");
    for (int a : joint_action)
      if (a < 0 || a >= kNumActions) throw std::invalid_argument("nav: invalid action id");

    ++t_;
    for (int i = 0; i < cfg_.n_agents; ++i) {
      const std::size_t iu = static_cast<std::size_t>(i);
      const int a = joint_action[iu];
      Vec2& v = vel_[iu];
      v.x = v.x * (1.0 - cfg_.damping) + kAx[a] * cfg_.accel * cfg_.dt;
      v.y = v.y * (1.0 - cfg_.damping) + kAy[a] * cfg_.accel * cfg_.dt;
      Vec2& p = pos_[iu];
      p.x += v.x * cfg_.dt;
      p.y += v.y * cfg_.dt;
      clamp_axis(p.x, v.x);
      clamp_axis(p.y, v.y);
    }

    EnvStep result;
    result.rewards.assign(static_cast<std::size_t>(cfg_.n_agents), 0.0);
    for (int i = 0; i < cfg_.n_agents; ++i)
      result.rewards[static_cast<std::size_t>(i)] = -min_landmark_distance(i);

    for (int i = 0; i < cfg_.n_agents; ++i) {
      for (int j = i + 1; j < cfg_.n_agents; ++j) {
        if (distance(pos_[static_cast<std::size_t>(i)], pos_[static_cast<std::size_t>(j)]) <
            2.0 * cfg_.agent_radius) {
          result.rewards[static_cast<std::size_t>(i)] -= cfg_.r_collision;
          result.rewards[static_cast<std::size_t>(j)] -= cfg_.r_collision;
          ++result.collisions;
        }
      }
    }

    result.terminal = t_ >= cfg_.horizon;
    result.observations.reserve(static_cast<std::size_t>(cfg_.n_agents));
    for (int i = 0; i < cfg_.n_agents; ++i) result.observations.push_back(observe(i));
    return result;
  }

  /// Own position and velocity, landmark offsets, then other-agent offsets in
  /// ascending agent order; offsets of agents at distance >= D are zeroed.
  std::vector<double> observe(int agent) const override {
    const std::size_t au = static_cast<std::size_t>(agent);
    std::vector<double> obs;
    obs.reserve(static_cast<std::size_t>(obs_dim()));
    obs.push_back(pos_[au].x);
    obs.push_back(pos_[au].y);
    obs.push_back(vel_[au].x);
    obs.push_back(vel_[au].y);
    for (const Vec2& l : landmarks_) {
      obs.push_back(l.x - pos_[au].x);
      obs.push_back(l.y - pos_[au].y);
    }
    for (int j = 0; j < cfg_.n_agents; ++j) {
      if (j == agent) continue;
      const Vec2& q = pos_[static_cast<std::size_t>(j)];
      if (distance(pos_[au], q) < cfg_.sense_radius) {
        obs.push_back(q.x - pos_[au].x);
        obs.push_back(q.y - pos_[au].y);
      } else {
        obs.push_back(0.0);
        obs.push_back(0.0);
      }
    }
    return obs;
  }

  int num_agents() const override { return cfg_.n_agents; }
  int obs_dim() const override { return 4 + 2 * cfg_.n_landmarks + 2 * (cfg_.n_agents - 1); }
  int num_actions() const override { return kNumActions; }
  int step_count() const override { return t_; }
  std::pair<double, double> agent_position(int agent) const override {
    const Vec2& p = pos_[static_cast<std::size_t>(agent)];
    return {p.x, p.y};
  }

  const NavConfig& config() const { return cfg_; }
  const std::vector<Vec2>& positions() const { return pos_; }
  const std::vector<Vec2>& landmarks() const { return landmarks_; }

  /// Debug/test hook.
  void set_state(const std::vector<Vec2>& agents, const std::vector<Vec2>& landmarks) {
    if (static_cast<int>(agents.size()) != cfg_.n_agents ||
        static_cast<int>(landmarks.size()) != cfg_.n_landmarks)
      throw std::invalid_argument("nav: wrong entity counts");
    pos_ = agents;
    landmarks_ = landmarks;
    vel_.assign(static_cast<std::size_t>(cfg_.n_agents), Vec2{});
  }

  static constexpr int kNumActions = 5;

 private:
  static constexpr double kAx[kNumActions] = {0.0, 1.0, -1.0, 0.0, 0.0};
  static constexpr double kAy[kNumActions] = {0.0, 0.0, 0.0, 1.0, -1.0};

  static double distance(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
  }

  void clamp_axis(double& p, double& v) const {
    if (p > cfg_.half_width) {
      p = cfg_.half_width;
      v = 0.0;
    } else if (p < -cfg_.half_width) {
      p = -cfg_.half_width;
      v = 0.0;
    }
  }

  double min_landmark_distance(int agent) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& l : landmarks_)
      best = std::min(best, distance(pos_[static_cast<std::size_t>(agent)], l));
    return best;
  }

  NavConfig cfg_;
  Rng rng_;
  int t_ = 0;
  std::vector<Vec2> pos_;
  std::vector<Vec2> vel_;
  std::vector<Vec2> landmarks_;
};

}  // namespace dnmd
