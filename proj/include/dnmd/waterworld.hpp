#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dnmd/env.hpp"
#include "dnmd/rng.hpp"

namespace dnmd {

struct WaterworldConfig {
  int n_agents = 8;
  int n_coop = 4;   // K agents must touch a food target simultaneously
  int n_food = 4;   // defaults to n_agents / 2
  int n_poison = 8;  // defaults to n_agents
  int horizon = 500;
  int n_sensors = 25;
  double sensor_range = 0.3;
  double obstacle_radius = 0.15;  // circular obstacle at the arena center
  double agent_radius = 0.015;
  double food_radius = 0.02;
  double poison_radius = 0.015;
  double accel = 0.002;  // velocity gained per unit action, per step
  double damping = 0.2;
  double max_speed = 0.01;  // agent speed cap
  double food_speed = 0.003;
  double poison_speed = 0.003;
  double r_food = 10.0;       // R1+ to each toucher when >= n_coop touch at once
  double r_encounter = 0.01;  // R2+ to every toucher of food, capture or not
  double r_poison = 0.1;      // R1- subtracted per poison contact
};

/// Continuous-control waterworld in the unit square with a circular obstacle
/// at the center. Agents emit 2D accelerations (unit-ball clamped) and pay a
/// -|a|^2 action penalty. Food is consumed and respawned only when at least
/// n_coop agents touch it in the same tick; poison persists and penalizes on
/// contact. Each agent senses the world through n_sensors evenly spaced
/// range-limited rays.
class WaterworldEnv {
 public:
  struct Vec2 {
    double x = 0.0;
    double y = 0.0;
  };

  explicit WaterworldEnv(const WaterworldConfig& cfg) : cfg_(cfg), rng_(0) {
    if (cfg.n_agents <= 0 || cfg.n_coop <= 0 || cfg.n_coop > cfg.n_agents)
      throw std::invalid_argument("waterworld: need 0 < n_coop <= n_agents");
    if (cfg.n_food <= 0 || cfg.n_poison < 0 || cfg.n_sensors <= 0 || cfg.horizon <= 0)
      throw std::invalid_argument("waterworld: bad entity counts");
    if (cfg.sensor_range <= 0.0 || cfg.agent_radius <= 0.0)
      throw std::invalid_argument("waterworld: bad geometry");
    if (cfg.obstacle_radius < 0.0 || cfg.obstacle_radius > 0.4)
      throw std::invalid_argument("waterworld: obstacle must fit in the arena");
  }

  void reset(std::uint64_t seed) {
    rng_ = Rng(splitmix64(seed));
    t_ = 0;
    agents_.assign(static_cast<std::size_t>(cfg_.n_agents), Body{});
    for (Body& b : agents_) b.pos = random_position(cfg_.agent_radius);
    food_.assign(static_cast<std::size_t>(cfg_.n_food), Body{});
    for (Body& b : food_) spawn_drifting(b, cfg_.food_radius, cfg_.food_speed);
    poison_.assign(static_cast<std::size_t>(cfg_.n_poison), Body{});
    for (Body& b : poison_) spawn_drifting(b, cfg_.poison_radius, cfg_.poison_speed);
  }

  EnvStep step(const std::vector<std::array<double, 2>>& joint_action) {
    if (static_cast<int>(joint_action.size()) != cfg_.n_agents)
      throw std::invalid_argument("waterworld: one action per agent required");
    for (const auto& a : joint_action)
      if (!std::isfinite(a[0]) || !std::isfinite(a[1]))
        throw std::invalid_argument("waterworld: non-finite action");

    ++t_;
    EnvStep result;
    result.rewards.assign(static_cast<std::size_t>(cfg_.n_agents), 0.0);

    for (int i = 0; i < cfg_.n_agents; ++i) {
      Vec2 a{joint_action[static_cast<std::size_t>(i)][0],
             joint_action[static_cast<std::size_t>(i)][1]};
      const double norm = std::hypot(a.x, a.y);
      if (norm > 1.0) {
        a.x /= norm;
        a.y /= norm;
      }
      result.rewards[static_cast<std::size_t>(i)] -= a.x * a.x + a.y * a.y;
      Body& b = agents_[static_cast<std::size_t>(i)];
      b.vel.x = b.vel.x * (1.0 - cfg_.damping) + a.x * cfg_.accel;
      b.vel.y = b.vel.y * (1.0 - cfg_.damping) + a.y * cfg_.accel;
      cap_speed(b.vel);
      b.pos.x += b.vel.x;
      b.pos.y += b.vel.y;
      clamp_axis(b.pos.x, b.vel.x, cfg_.agent_radius);
      clamp_axis(b.pos.y, b.vel.y, cfg_.agent_radius);
      block_on_obstacle(b, cfg_.agent_radius);
    }
    for (Body& b : food_) drift(b, cfg_.food_radius);
    for (Body& b : poison_) drift(b, cfg_.poison_radius);

    for (int i = 0; i < cfg_.n_agents; ++i) {
      for (const Body& p : poison_) {
        if (touching(agents_[static_cast<std::size_t>(i)], cfg_.agent_radius, p,
                     cfg_.poison_radius)) {
          result.rewards[static_cast<std::size_t>(i)] -= cfg_.r_poison;
          ++result.collisions;
        }
      }
    }

    std::vector<int> touchers;
    for (Body& f : food_) {
      touchers.clear();
      for (int i = 0; i < cfg_.n_agents; ++i)
        if (touching(agents_[static_cast<std::size_t>(i)], cfg_.agent_radius, f,
                     cfg_.food_radius))
          touchers.push_back(i);
      for (int i : touchers) result.rewards[static_cast<std::size_t>(i)] += cfg_.r_encounter;
      if (static_cast<int>(touchers.size()) >= cfg_.n_coop) {
        for (int i : touchers) result.rewards[static_cast<std::size_t>(i)] += cfg_.r_food;
        spawn_drifting(f, cfg_.food_radius, cfg_.food_speed);
        ++result.captures;
      }
    }

    result.terminal = t_ >= cfg_.horizon;
    result.observations.reserve(static_cast<std::size_t>(cfg_.n_agents));
    for (int i = 0; i < cfg_.n_agents; ++i) result.observations.push_back(observe(i));
    return result;
  }

  /// Per sensor: [agent dist, agent radial speed, food dist, food radial
  /// speed, poison dist, poison radial speed, obstacle dist]; distances are
  /// normalized to sensor range with 1.0 when nothing is hit, radial speed is
  /// the hit body's velocity relative to the observer projected on the ray.
  /// Tail: own position, own velocity.
  std::vector<double> observe(int agent) const {
    const Body& self = agents_[static_cast<std::size_t>(agent)];
    std::vector<double> obs;
    obs.reserve(static_cast<std::size_t>(obs_dim()));
    for (int k = 0; k < cfg_.n_sensors; ++k) {
      const double theta = 2.0 * kPi * k / cfg_.n_sensors;
      const Vec2 dir{std::cos(theta), std::sin(theta)};
      push_category_readings(obs, self, dir, agents_, cfg_.agent_radius, agent);
      push_category_readings(obs, self, dir, food_, cfg_.food_radius, -1);
      push_category_readings(obs, self, dir, poison_, cfg_.poison_radius, -1);
      const double to = ray_hit(self.pos, dir, obstacle_, cfg_.obstacle_radius);
      obs.push_back(to >= 0.0 ? to / cfg_.sensor_range : 1.0);
    }
    obs.push_back(self.pos.x);
    obs.push_back(self.pos.y);
    obs.push_back(self.vel.x);
    obs.push_back(self.vel.y);
    return obs;
  }

  int num_agents() const { return cfg_.n_agents; }
  int obs_dim() const { return cfg_.n_sensors * 7 + 4; }
  int action_dim() const { return 2; }
  int step_count() const { return t_; }

  const WaterworldConfig& config() const { return cfg_; }
  std::vector<Vec2> agent_positions() const { return positions_of(agents_); }
  std::vector<Vec2> food_positions() const { return positions_of(food_); }
  std::vector<Vec2> poison_positions() const { return positions_of(poison_); }
  std::vector<Vec2> agent_velocities() const {
    std::vector<Vec2> out;
    out.reserve(agents_.size());
    for (const Body& b : agents_) out.push_back(b.vel);
    return out;
  }

  /// Debug/test hook; zeroes all velocities.
  void set_state(const std::vector<Vec2>& agents, const std::vector<Vec2>& food,
                 const std::vector<Vec2>& poison) {
    if (static_cast<int>(agents.size()) != cfg_.n_agents ||
        static_cast<int>(food.size()) != cfg_.n_food ||
        static_cast<int>(poison.size()) != cfg_.n_poison)
      throw std::invalid_argument("waterworld: wrong entity counts");
    for (std::size_t i = 0; i < agents.size(); ++i) agents_[i] = Body{agents[i], Vec2{}};
    for (std::size_t i = 0; i < food.size(); ++i) food_[i] = Body{food[i], Vec2{}};
    for (std::size_t i = 0; i < poison.size(); ++i) poison_[i] = Body{poison[i], Vec2{}};
  }

 private:
  struct Body {
    Vec2 pos;
    Vec2 vel;
  };

  static constexpr double kPi = 3.14159265358979323846;

  /// Uniform over the arena, rejecting spots that overlap the obstacle.
  Vec2 random_position(double radius) {
    const double clearance = cfg_.obstacle_radius + radius;
    while (true) {
      const Vec2 p{rng_.uniform(radius, 1.0 - radius), rng_.uniform(radius, 1.0 - radius)};
      if (std::hypot(p.x - obstacle_.pos.x, p.y - obstacle_.pos.y) >= clearance) return p;
    }
  }

  void spawn_drifting(Body& b, double radius, double speed) {
    b.pos = random_position(radius);
    const double theta = rng_.uniform(0.0, 2.0 * kPi);
    b.vel = {speed * std::cos(theta), speed * std::sin(theta)};
  }

  void cap_speed(Vec2& v) const {
    const double s = std::hypot(v.x, v.y);
    if (s > cfg_.max_speed) {
      v.x *= cfg_.max_speed / s;
      v.y *= cfg_.max_speed / s;
    }
  }

  static void clamp_axis(double& p, double& v, double radius) {
    if (p > 1.0 - radius) {
      p = 1.0 - radius;
      v = 0.0;
    } else if (p < radius) {
      p = radius;
      v = 0.0;
    }
  }

  /// Food and poison bounce off the walls instead of sticking to them.
  static void reflect_axis(double& p, double& v, double radius) {
    if (p > 1.0 - radius) {
      p = 2.0 * (1.0 - radius) - p;
      v = -v;
    } else if (p < radius) {
      p = 2.0 * radius - p;
      v = -v;
    }
  }

  /// Pushes an overlapping body to the obstacle surface and removes the
  /// inward velocity component (agents slide along the obstacle).
  void block_on_obstacle(Body& b, double radius) const {
    const double clearance = cfg_.obstacle_radius + radius;
    double nx = b.pos.x - obstacle_.pos.x;
    double ny = b.pos.y - obstacle_.pos.y;
    double d = std::hypot(nx, ny);
    if (d >= clearance) return;
    if (d < 1e-12) {
      nx = 1.0;
      ny = 0.0;
      d = 1.0;
    }
    nx /= d;
    ny /= d;
    b.pos.x = obstacle_.pos.x + nx * clearance;
    b.pos.y = obstacle_.pos.y + ny * clearance;
    const double vn = b.vel.x * nx + b.vel.y * ny;
    if (vn < 0.0) {
      b.vel.x -= vn * nx;
      b.vel.y -= vn * ny;
    }
  }

  /// As block_on_obstacle but reflecting the inward velocity component, so
  /// drifting food and poison bounce off the obstacle.
  void bounce_on_obstacle(Body& b, double radius) const {
    const double clearance = cfg_.obstacle_radius + radius;
    double nx = b.pos.x - obstacle_.pos.x;
    double ny = b.pos.y - obstacle_.pos.y;
    double d = std::hypot(nx, ny);
    if (d >= clearance) return;
    if (d < 1e-12) {
      nx = 1.0;
      ny = 0.0;
      d = 1.0;
    }
    nx /= d;
    ny /= d;
    b.pos.x = obstacle_.pos.x + nx * clearance;
    b.pos.y = obstacle_.pos.y + ny * clearance;
    const double vn = b.vel.x * nx + b.vel.y * ny;
    if (vn < 0.0) {
      b.vel.x -= 2.0 * vn * nx;
      b.vel.y -= 2.0 * vn * ny;
    }
  }

  void drift(Body& b, double radius) const {
    b.pos.x += b.vel.x;
    b.pos.y += b.vel.y;
    reflect_axis(b.pos.x, b.vel.x, radius);
    reflect_axis(b.pos.y, b.vel.y, radius);
    bounce_on_obstacle(b, radius);
  }

  static bool touching(const Body& a, double ra, const Body& b, double rb) {
    return std::hypot(a.pos.x - b.pos.x, a.pos.y - b.pos.y) <= ra + rb;
  }

  static std::vector<Vec2> positions_of(const std::vector<Body>& bodies) {
    std::vector<Vec2> out;
    out.reserve(bodies.size());
    for (const Body& b : bodies) out.push_back(b.pos);
    return out;
  }

  /// Ray-circle test; returns hit distance in [0, sensor_range] or a negative
  /// value on miss.
  double ray_hit(const Vec2& origin, const Vec2& dir, const Body& b, double radius) const {
    const double ocx = b.pos.x - origin.x;
    const double ocy = b.pos.y - origin.y;
    const double tc = ocx * dir.x + ocy * dir.y;
    if (tc < 0.0) return -1.0;
    const double d2 = ocx * ocx + ocy * ocy - tc * tc;
    const double r2 = radius * radius;
    if (d2 > r2) return -1.0;
    const double thit = std::max(tc - std::sqrt(r2 - d2), 0.0);
    return thit <= cfg_.sensor_range ? thit : -1.0;
  }

  /// Appends the [distance, radial speed] pair for the nearest body of one
  /// category along the ray; `skip` excludes the sensing agent itself.
  void push_category_readings(std::vector<double>& obs, const Body& self, const Vec2& dir,
                              const std::vector<Body>& bodies, double radius, int skip) const {
    double best = std::numeric_limits<double>::infinity();
    const Body* hit = nullptr;
    for (int i = 0; i < static_cast<int>(bodies.size()); ++i) {
      if (i == skip) continue;
      const double t = ray_hit(self.pos, dir, bodies[static_cast<std::size_t>(i)], radius);
      if (t >= 0.0 && t < best) {
        best = t;
        hit = &bodies[static_cast<std::size_t>(i)];
      }
    }
    if (hit == nullptr) {
      obs.push_back(1.0);
      obs.push_back(0.0);
    } else {
      obs.push_back(best / cfg_.sensor_range);
      obs.push_back((hit->vel.x - self.vel.x) * dir.x + (hit->vel.y - self.vel.y) * dir.y);
    }
  }

  WaterworldConfig cfg_;
  Rng rng_;
  int t_ = 0;
  Body obstacle_{{0.5, 0.5}, {0.0, 0.0}};
  std::vector<Body> agents_;
  std::vector<Body> food_;
  std::vector<Body> poison_;
};

}  // namespace dnmd
