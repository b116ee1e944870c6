#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dnmd/autoencoder.hpp"
#include "dnmd/config.hpp"
#include "dnmd/ddpg.hpp"
#include "dnmd/dqn.hpp"
#include "dnmd/env.hpp"
#include "dnmd/metrics.hpp"
#include "dnmd/nav.hpp"
#include "dnmd/pursuit.hpp"
#include "dnmd/replay.hpp"
#include "dnmd/rng.hpp"
#include "dnmd/waterworld.hpp"

namespace dnmd {

/// Stream tags deriving the independent RNG streams of one run from its seed.
/// The env stream never sees draws from exploration, sampling, or masking, so
/// changing p (or the mode) cannot perturb the episode sequence.
namespace rng_tag {
constexpr std::uint64_t kInit = 1;
constexpr std::uint64_t kEnv = 2;
constexpr std::uint64_t kExplore = 3;
constexpr std::uint64_t kMinibatch = 4;
constexpr std::uint64_t kMask = 5;
constexpr std::uint64_t kEvalEnv = 6;
constexpr std::uint64_t kEvalAct = 7;
constexpr std::uint64_t kLink = 8;
constexpr std::uint64_t kSamples = 9;
}  // namespace rng_tag

// ---------------------------------------------------------------------------
// Link failure
// ---------------------------------------------------------------------------

/// Communication-failure regime for evaluation. A broken pair exchanges zero
/// vectors in both directions; the zeros are installed before execution-time
/// scaling.
struct LinkFailure {
  enum class Kind { None, Half, All, Prob };
  Kind kind = Kind::None;
  double q = 0.0;  // per-pair, per-step breakage probability (Prob only)

  static LinkFailure parse(const std::string& s) {
    LinkFailure f;
    if (s == "none") {
      f.kind = Kind::None;
    } else if (s == "half") {
      f.kind = Kind::Half;
    } else if (s == "all") {
      f.kind = Kind::All;
    } else if (s.rfind("prob:", 0) == 0) {
      f.kind = Kind::Prob;
      const std::string num = s.substr(5);
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), f.q);
      if (ec != std::errc{} || ptr != num.data() + num.size() || !(f.q >= 0.0 && f.q <= 1.0))
        throw std::invalid_argument("link-failure probability must be a number in [0, 1]");
    } else {
      throw std::invalid_argument("unknown link-failure spec: " + s);
    }
    return f;
  }

  std::string name() const {
    switch (kind) {
      case Kind::None: return "none";
      case Kind::Half: return "half";
      case Kind::All: return "all";
      case Kind::Prob: return "prob:" + format_double(q);
    }
    return "?";
  }
};

/// Broken-pair bookkeeping. "half" draws floor(P/2) unordered pairs once per
/// evaluation run and keeps them fixed; "prob" re-draws every step.
class LinkState {
 public:
  LinkState(const LinkFailure& failure, int n_agents, Rng& rng)
      : failure_(failure), n_(n_agents), broken_(static_cast<std::size_t>(n_agents * n_agents), 0) {
    if (n_agents < 1) throw std::invalid_argument("links: need at least one agent");
    switch (failure_.kind) {
      case LinkFailure::Kind::None:
      case LinkFailure::Kind::Prob:
        break;
      case LinkFailure::Kind::All:
        for (int i = 0; i < n_; ++i)
          for (int j = i + 1; j < n_; ++j) set_pair(i, j, true);
        break;
      case LinkFailure::Kind::Half: {
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i < n_; ++i)
          for (int j = i + 1; j < n_; ++j) pairs.push_back({i, j});
        rng.shuffle(pairs);
        const std::size_t take = pairs.size() / 2;
        for (std::size_t k = 0; k < take; ++k) set_pair(pairs[k].first, pairs[k].second, true);
        break;
      }
    }
  }

  /// Per-step re-draw (Prob regime only; the other regimes are static).
  void begin_step(Rng& rng) {
    if (failure_.kind != LinkFailure::Kind::Prob) return;
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j) set_pair(i, j, rng.bernoulli(failure_.q));
  }

  bool broken(int i, int j) const {
    return broken_[static_cast<std::size_t>(i * n_ + j)] != 0;
  }

 private:
  void set_pair(int i, int j, bool value) {
    broken_[static_cast<std::size_t>(i * n_ + j)] = value ? 1 : 0;
    broken_[static_cast<std::size_t>(j * n_ + i)] = value ? 1 : 0;
  }

  LinkFailure failure_;
  int n_;
  std::vector<std::uint8_t> broken_;
};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class EnvFamily { Pursuit, Nav, Waterworld };

/// One run, fully resolved: the environment, the algorithm variant, and all
/// schedule constants. Built from a flat key=value Config and convertible
/// back (the checkpoint manifest round-trips through this).
struct RunConfig {
  std::string env_name;
  EnvFamily family = EnvFamily::Pursuit;
  PursuitConfig pursuit;
  NavConfig nav;
  WaterworldConfig water;

  AgentMode mode = AgentMode::DCC_MD;  // discrete families
  DdpgKind kind = DdpgKind::MADDPG_MD;  // waterworld
  double p = 0.2;

  DqnConfig dqn;
  DdpgConfig ddpg;

  std::int64_t total_steps = 0;
  std::uint64_t seed = 1;
  std::size_t replay_capacity = 0;  // 0 = family default
  int warmup = 0;                   // 0 = 10 x batch size
  std::int64_t metrics_every = 1000;
  std::int64_t checkpoint_every = 0;  // 0 = final checkpoint only
  int eval_episodes = 50;
  std::string ae_checkpoint;  // non-empty: compress messages with this model

  bool continuous() const { return family == EnvFamily::Waterworld; }

  std::size_t effective_replay_capacity() const {
    if (replay_capacity != 0) return replay_capacity;
    return continuous() ? 500000u : 200000u;
  }
  int effective_warmup() const {
    const int batch = continuous() ? ddpg.batch_size : dqn.batch_size;
    return warmup != 0 ? warmup : 10 * batch;
  }

  std::string run_id() const {
    const std::string algo =
        continuous() ? kind_name(kind) : mode_name(mode);
    return env_name + "-" + algo + "-p" + format_double(p) + "-s" + std::to_string(seed);
  }

  static RunConfig from_config(const Config& c);
  Config to_config() const;
};

namespace detail {

inline int get_pos_int(const Config& c, const std::string& key, int fallback) {
  const std::int64_t v = c.get_int(key, fallback);
  if (v <= 0 || v > INT32_MAX) throw std::invalid_argument("config: " + key + " must be a positive int");
  return static_cast<int>(v);
}

inline const std::set<std::string>& known_keys(EnvFamily family) {
  static const std::set<std::string> common = {
      "env.name", "agent.p", "train.total_steps", "train.seed", "train.batch_size",
      "train.replay_capacity", "train.warmup", "train.metrics_every",
      "train.checkpoint_every", "train.eval_episodes", "train.gamma"};
  static const std::set<std::string> discrete = [] {
    std::set<std::string> s = common;
    s.insert({"agent.mode", "train.lr", "train.train_every", "train.target_sync_every",
              "train.eps_start", "train.eps_end", "train.eps_anneal_steps",
              "train.ae_checkpoint"});
    return s;
  }();
  static const std::set<std::string> pursuit = [] {
    std::set<std::string> s = discrete;
    s.insert({"env.n_pursuers", "env.m_evaders", "env.width", "env.height",
              "env.sense_range", "env.horizon"});
    return s;
  }();
  static const std::set<std::string> nav = [] {
    std::set<std::string> s = discrete;
    s.insert({"env.n_agents", "env.n_landmarks", "env.horizon"});
    return s;
  }();
  static const std::set<std::string> water = [] {
    std::set<std::string> s = common;
    s.insert({"agent.kind", "env.n_agents", "env.n_coop", "env.n_food", "env.n_poison",
              "env.horizon", "train.lr_actor", "train.lr_critic", "train.critic_every",
              "train.actor_every", "train.target_sync_every", "train.sigma"});
    return s;
  }();
  switch (family) {
    case EnvFamily::Pursuit: return pursuit;
    case EnvFamily::Nav: return nav;
    case EnvFamily::Waterworld: return water;
  }
  return common;
}

}  // namespace detail

inline RunConfig RunConfig::from_config(const Config& c) {
  RunConfig rc;
  rc.env_name = c.get_string("env.name");
  if (rc.env_name == "pursuit") {
    rc.family = EnvFamily::Pursuit;
  } else if (rc.env_name == "nav") {
    rc.family = EnvFamily::Nav;
  } else if (rc.env_name == "waterworld") {
    rc.family = EnvFamily::Waterworld;
  } else {
    throw std::invalid_argument("config: unknown env.name '" + rc.env_name + "'");
  }

  const std::set<std::string>& known = detail::known_keys(rc.family);
  for (const auto& [key, value] : c.entries()) {
    (void)value;
    if (key.rfind("ckpt.", 0) == 0) continue;  // manifest bookkeeping keys
    if (!known.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "' for env " + rc.env_name);
  }

  rc.p = c.get_double("agent.p", 0.2);
  if (!(rc.p >= 0.0 && rc.p <= 1.0))
    throw std::invalid_argument("config: agent.p must lie in [0, 1]");
  rc.total_steps = c.get_int("train.total_steps");
  if (rc.total_steps < 0) throw std::invalid_argument("config: train.total_steps must be >= 0");
  rc.seed = static_cast<std::uint64_t>(c.get_int("train.seed", 1));
  const std::int64_t cap = c.get_int("train.replay_capacity", 0);
  if (cap < 0) throw std::invalid_argument("config: train.replay_capacity must be >= 0");
  rc.replay_capacity = static_cast<std::size_t>(cap);
  rc.warmup = static_cast<int>(c.get_int("train.warmup", 0));
  if (rc.warmup < 0) throw std::invalid_argument("config: train.warmup must be >= 0");
  rc.metrics_every = c.get_int("train.metrics_every", 1000);
  if (rc.metrics_every <= 0) throw std::invalid_argument("config: train.metrics_every must be > 0");
  rc.checkpoint_every = c.get_int("train.checkpoint_every", 0);
  if (rc.checkpoint_every < 0)
    throw std::invalid_argument("config: train.checkpoint_every must be >= 0");
  rc.eval_episodes = detail::get_pos_int(c, "train.eval_episodes", 50);

  switch (rc.family) {
    case EnvFamily::Pursuit: {
      rc.pursuit.n_pursuers = detail::get_pos_int(c, "env.n_pursuers", 4);
      rc.pursuit.m_evaders = detail::get_pos_int(c, "env.m_evaders", 2);
      rc.pursuit.width = detail::get_pos_int(c, "env.width", 10);
      rc.pursuit.height = detail::get_pos_int(c, "env.height", 10);
      rc.pursuit.sense_range = detail::get_pos_int(c, "env.sense_range", 3);
      rc.pursuit.horizon = detail::get_pos_int(c, "env.horizon", 500);
      break;
    }
    case EnvFamily::Nav: {
      rc.nav.n_agents = detail::get_pos_int(c, "env.n_agents", 4);
      rc.nav.n_landmarks = detail::get_pos_int(c, "env.n_landmarks", 4);
      rc.nav.horizon = detail::get_pos_int(c, "env.horizon", 100);
      break;
    }
    case EnvFamily::Waterworld: {
      rc.water.n_agents = detail::get_pos_int(c, "env.n_agents", 4);
      rc.water.n_coop = detail::get_pos_int(c, "env.n_coop", 2);
      rc.water.n_food = detail::get_pos_int(c, "env.n_food", std::max(1, rc.water.n_agents / 2));
      rc.water.n_poison = detail::get_pos_int(c, "env.n_poison", rc.water.n_agents);
      rc.water.horizon = detail::get_pos_int(c, "env.horizon", 500);
      break;
    }
  }

  if (rc.continuous()) {
    rc.kind = parse_kind(c.get_string("agent.kind", "maddpg_md"));
    rc.ddpg.kind = rc.kind;
    rc.ddpg.p = rc.p;
    rc.ddpg.gamma = c.get_double("train.gamma", 0.95);
    rc.ddpg.lr_actor = c.get_double("train.lr_actor", 1e-3);
    rc.ddpg.lr_critic = c.get_double("train.lr_critic", 1e-3);
    rc.ddpg.batch_size = detail::get_pos_int(c, "train.batch_size", 32);
    rc.ddpg.critic_every = detail::get_pos_int(c, "train.critic_every", 5);
    rc.ddpg.actor_every = detail::get_pos_int(c, "train.actor_every", 10);
    rc.ddpg.target_sync_every = detail::get_pos_int(c, "train.target_sync_every", 500);
    rc.ddpg.sigma = c.get_double("train.sigma", 0.15);
    if (rc.ddpg.sigma < 0.0) throw std::invalid_argument("config: train.sigma must be >= 0");
  } else {
    rc.mode = parse_mode(c.get_string("agent.mode", "dcc_md"));
    rc.dqn.mode = rc.mode;
    rc.dqn.p = rc.p;
    rc.dqn.gamma = c.get_double("train.gamma", 0.99);
    rc.dqn.lr = c.get_double("train.lr", 1e-4);
    rc.dqn.batch_size = detail::get_pos_int(c, "train.batch_size", 32);
    rc.dqn.train_every = detail::get_pos_int(c, "train.train_every", 4);
    rc.dqn.target_sync_every = detail::get_pos_int(c, "train.target_sync_every", 2000);
    rc.dqn.eps.start = c.get_double("train.eps_start", 1.0);
    rc.dqn.eps.end = c.get_double("train.eps_end", 0.02);
    rc.dqn.eps.anneal_steps =
        c.get_int("train.eps_anneal_steps", std::max<std::int64_t>(1, rc.total_steps / 2));
    if (rc.dqn.eps.anneal_steps <= 0)
      throw std::invalid_argument("config: train.eps_anneal_steps must be > 0");
    rc.ae_checkpoint = c.get_string("train.ae_checkpoint", "");
  }
  return rc;
}

inline Config RunConfig::to_config() const {
  Config c;
  c.set("env.name", env_name);
  c.set("agent.p", format_double(p));
  c.set("train.total_steps", std::to_string(total_steps));
  c.set("train.seed", std::to_string(seed));
  c.set("train.replay_capacity", std::to_string(replay_capacity));
  c.set("train.warmup", std::to_string(warmup));
  c.set("train.metrics_every", std::to_string(metrics_every));
  c.set("train.checkpoint_every", std::to_string(checkpoint_every));
  c.set("train.eval_episodes", std::to_string(eval_episodes));
  switch (family) {
    case EnvFamily::Pursuit:
      c.set("env.n_pursuers", std::to_string(pursuit.n_pursuers));
      c.set("env.m_evaders", std::to_string(pursuit.m_evaders));
      c.set("env.width", std::to_string(pursuit.width));
      c.set("env.height", std::to_string(pursuit.height));
      c.set("env.sense_range", std::to_string(pursuit.sense_range));
      c.set("env.horizon", std::to_string(pursuit.horizon));
      break;
    case EnvFamily::Nav:
      c.set("env.n_agents", std::to_string(nav.n_agents));
      c.set("env.n_landmarks", std::to_string(nav.n_landmarks));
      c.set("env.horizon", std::to_string(nav.horizon));
      break;
    case EnvFamily::Waterworld:
      c.set("env.n_agents", std::to_string(water.n_agents));
      c.set("env.n_coop", std::to_string(water.n_coop));
      c.set("env.n_food", std::to_string(water.n_food));
      c.set("env.n_poison", std::to_string(water.n_poison));
      c.set("env.horizon", std::to_string(water.horizon));
      break;
  }
  if (continuous()) {
    c.set("agent.kind", kind_name(kind));
    c.set("train.gamma", format_double(ddpg.gamma));
    c.set("train.lr_actor", format_double(ddpg.lr_actor));
    c.set("train.lr_critic", format_double(ddpg.lr_critic));
    c.set("train.batch_size", std::to_string(ddpg.batch_size));
    c.set("train.critic_every", std::to_string(ddpg.critic_every));
    c.set("train.actor_every", std::to_string(ddpg.actor_every));
    c.set("train.target_sync_every", std::to_string(ddpg.target_sync_every));
    c.set("train.sigma", format_double(ddpg.sigma));
  } else {
    c.set("agent.mode", mode_name(mode));
    c.set("train.gamma", format_double(dqn.gamma));
    c.set("train.lr", format_double(dqn.lr));
    c.set("train.batch_size", std::to_string(dqn.batch_size));
    c.set("train.train_every", std::to_string(dqn.train_every));
    c.set("train.target_sync_every", std::to_string(dqn.target_sync_every));
    c.set("train.eps_start", format_double(dqn.eps.start));
    c.set("train.eps_end", format_double(dqn.eps.end));
    c.set("train.eps_anneal_steps", std::to_string(dqn.eps.anneal_steps));
    if (!ae_checkpoint.empty()) c.set("train.ae_checkpoint", ae_checkpoint);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

inline std::unique_ptr<DiscreteEnv> make_discrete_env(const RunConfig& rc) {
  switch (rc.family) {
    case EnvFamily::Pursuit: return std::make_unique<PursuitEnv>(rc.pursuit);
    case EnvFamily::Nav: return std::make_unique<NavEnv>(rc.nav);
    case EnvFamily::Waterworld:
      throw std::invalid_argument("waterworld is not a discrete environment");
  }
  return nullptr;
}

/// Per-agent network shapes. Pursuit: f obs->64->48, g single layer to 16N,
/// h 32 hidden; the no-communication chain is 64,48,32,|A|. Nav: f obs->64->64,
/// g single layer to 64, h 32 hidden.
struct QTopology {
  BlockLayout layout;
  std::vector<LayerSpec> f, g, h;
};

inline QTopology make_topology(const RunConfig& rc, int obs_dim, int msg_block_dim,
                               int n_agents, int num_actions) {
  QTopology t;
  std::vector<std::pair<int, int>> blocks;
  if (mode_uses_messages(rc.mode))
    for (int j = 0; j < n_agents - 1; ++j) blocks.push_back({j, msg_block_dim});
  t.layout = BlockLayout::make(obs_dim, blocks);

  const bool pursuit = rc.family == EnvFamily::Pursuit;
  const int f_hidden = 64;
  const int f_out = pursuit ? 48 : 64;
  const int g_out = pursuit ? 16 * n_agents : 64;
  const int h_hidden = 32;
  const int f_in = mode_uses_g(rc.mode) ? obs_dim : t.layout.total_dim;

  t.f = {{f_in, f_hidden, Activation::Relu}, {f_hidden, f_out, Activation::Relu}};
  if (mode_uses_g(rc.mode)) {
    t.g = {{t.layout.message_dim(), g_out, Activation::Relu}};
    t.h = {{f_out + g_out, h_hidden, Activation::Relu}, {h_hidden, num_actions, Activation::Linear}};
  } else {
    t.h = {{f_out, h_hidden, Activation::Relu}, {h_hidden, num_actions, Activation::Linear}};
  }
  return t;
}

inline std::vector<DqnAgent> make_discrete_agents(const RunConfig& rc, const DiscreteEnv& env,
                                                  Rng& init_rng) {
  const int msg_block = env.message_dim();
  const QTopology topo =
      make_topology(rc, env.obs_dim(), msg_block, env.num_agents(), env.num_actions());
  std::vector<DqnAgent> agents;
  agents.reserve(static_cast<std::size_t>(env.num_agents()));
  for (int i = 0; i < env.num_agents(); ++i)
    agents.emplace_back(rc.dqn, topo.layout, topo.f, topo.g, topo.h, init_rng);
  return agents;
}

// ---------------------------------------------------------------------------
// Joint replay record (discrete runs)
// ---------------------------------------------------------------------------

/// One joint tick stored once for all agents; per-agent transitions are
/// materialized at sample time (each agent's message is a re-ordering of the
/// same joint observations, so storing the views would duplicate the data
/// N-fold). msgs are kept only when a codec compresses them.
struct JointRecord {
  std::vector<std::vector<double>> obs, obs_next;
  std::vector<std::vector<double>> msgs, msgs_next;
  std::vector<int> actions;
  std::vector<double> rewards;
  bool terminal = false;

  bool shape_matches(const JointRecord& o) const {
    if (obs.size() != o.obs.size() || msgs.size() != o.msgs.size()) return false;
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (obs[i].size() != o.obs[i].size()) return false;
    for (std::size_t i = 0; i < msgs.size(); ++i)
      if (msgs[i].size() != o.msgs[i].size()) return false;
    return true;
  }
};

/// Received-message vector of one agent: the other agents' outgoing messages,
/// ascending sender order. `links` (if given) zeroes broken senders.
inline std::vector<double> gather_messages(const std::vector<std::vector<double>>& outgoing,
                                           int receiver, const LinkState* links = nullptr) {
  std::vector<double> m;
  for (int j = 0; j < static_cast<int>(outgoing.size()); ++j) {
    if (j == receiver) continue;
    const auto& src = outgoing[static_cast<std::size_t>(j)];
    if (links != nullptr && links->broken(receiver, j))
      m.insert(m.end(), src.size(), 0.0);
    else
      m.insert(m.end(), src.begin(), src.end());
  }
  return m;
}

inline Transition materialize(const JointRecord& rec, int agent, bool uses_messages) {
  Transition t;
  t.o = rec.obs[static_cast<std::size_t>(agent)];
  t.o_next = rec.obs_next[static_cast<std::size_t>(agent)];
  if (uses_messages) {
    t.m = gather_messages(rec.msgs.empty() ? rec.obs : rec.msgs, agent);
    t.m_next = gather_messages(rec.msgs_next.empty() ? rec.obs_next : rec.msgs_next, agent);
  }
  t.action = rec.actions[static_cast<std::size_t>(agent)];
  t.r = rec.rewards[static_cast<std::size_t>(agent)];
  t.terminal = rec.terminal;
  return t;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace detail {

inline void write_manifest(const std::filesystem::path& dir, const RunConfig& rc,
                           std::int64_t step) {
  Config c = rc.to_config();
  c.set("ckpt.step", std::to_string(step));
  std::ofstream os(dir / "manifest.txt");
  if (!os) throw std::runtime_error("checkpoint: cannot write " + (dir / "manifest.txt").string());
  for (const auto& [k, v] : c.entries()) os << k << "=" << v << "\n";
  if (!os.good()) throw std::runtime_error("checkpoint: manifest write failed");
}

inline void check_same_shape(const Mlp& loaded, const Mlp& expected, const std::string& what) {
  if (loaded.num_layers() != expected.num_layers())
    throw std::runtime_error("checkpoint: " + what + " does not match the configured topology");
  for (std::size_t l = 0; l < loaded.num_layers(); ++l)
    if (loaded.layers()[l].in != expected.layers()[l].in ||
        loaded.layers()[l].out != expected.layers()[l].out)
      throw std::runtime_error("checkpoint: " + what + " does not match the configured topology");
}

}  // namespace detail

inline void save_checkpoint(const std::string& dir_s, const RunConfig& rc,
                            const std::vector<DqnAgent>& agents, std::int64_t step,
                            const Autoencoder* codec_model = nullptr) {
  const std::filesystem::path dir(dir_s);
  std::filesystem::create_directories(dir);
  RunConfig manifest_rc = rc;
  if (codec_model != nullptr) {
    std::ofstream os(dir / "ae.bin", std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + (dir / "ae.bin").string());
    codec_model->save(os);
    manifest_rc.ae_checkpoint = "ae.bin";  // self-contained: resolved next to the manifest
  }
  detail::write_manifest(dir, manifest_rc, step);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string stem = "agent" + std::to_string(i);
    save_mlp_file((dir / (stem + "_f.bin")).string(), agents[i].online().f());
    if (mode_uses_g(rc.mode)) save_mlp_file((dir / (stem + "_g.bin")).string(), agents[i].online().g());
    save_mlp_file((dir / (stem + "_h.bin")).string(), agents[i].online().h());
  }
}

inline void save_checkpoint(const std::string& dir_s, const RunConfig& rc,
                            const MaddpgTrainer& trainer, std::int64_t step) {
  const std::filesystem::path dir(dir_s);
  std::filesystem::create_directories(dir);
  detail::write_manifest(dir, rc, step);
  save_mlp_file((dir / "actor.bin").string(), trainer.actor());
  save_mlp_file((dir / "critic_f1.bin").string(), trainer.critic().f1());
  save_mlp_file((dir / "critic_f2.bin").string(), trainer.critic().f2());
  if (kind_centralized(rc.kind)) save_mlp_file((dir / "critic_g.bin").string(), trainer.critic().g());
  save_mlp_file((dir / "critic_h.bin").string(), trainer.critic().h());
}

/// A restored run: configuration plus policies, ready to evaluate.
struct Checkpoint {
  RunConfig rc;
  std::int64_t step = 0;
  std::vector<DqnAgent> agents;              // discrete runs
  std::unique_ptr<MaddpgTrainer> trainer;    // waterworld runs
  std::unique_ptr<Autoencoder> codec_model;  // compressed-message runs
  std::unique_ptr<AutoencoderCodec> codec;
};

inline Checkpoint load_checkpoint(const std::string& dir_s) {
  const std::filesystem::path dir(dir_s);
  const Config manifest = Config::load((dir / "manifest.txt").string());
  Checkpoint ck;
  ck.rc = RunConfig::from_config(manifest);
  ck.step = manifest.get_int("ckpt.step", 0);

  Rng scratch(0);  // placeholder weights, overwritten from the files below
  if (ck.rc.continuous()) {
    ck.trainer = std::make_unique<MaddpgTrainer>(ck.rc.ddpg, ck.rc.water.n_agents,
                                                 ck.rc.water.n_sensors * 7 + 4, 2, scratch);
    const auto load_into = [&](const char* file, Mlp& dst, const std::string& what) {
      const Mlp loaded = load_mlp_file((dir / file).string());
      detail::check_same_shape(loaded, dst, what);
      dst = loaded;
    };
    load_into("actor.bin", ck.trainer->actor(), "actor");
    load_into("critic_f1.bin", ck.trainer->critic().f1(), "critic f1");
    load_into("critic_f2.bin", ck.trainer->critic().f2(), "critic f2");
    if (kind_centralized(ck.rc.kind)) load_into("critic_g.bin", ck.trainer->critic().g(), "critic g");
    load_into("critic_h.bin", ck.trainer->critic().h(), "critic h");
    ck.trainer->sync_targets();
    return ck;
  }

  if (!ck.rc.ae_checkpoint.empty()) {
    const std::filesystem::path ae_path = dir / ck.rc.ae_checkpoint;
    std::ifstream is(ae_path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot read " + ae_path.string());
    ck.codec_model = std::make_unique<Autoencoder>(Autoencoder::load(is));
    ck.codec = std::make_unique<AutoencoderCodec>(*ck.codec_model);
  }
  const std::unique_ptr<DiscreteEnv> env = make_discrete_env(ck.rc);
  if (ck.codec) env->set_message_encoder(ck.codec.get());
  const QTopology topo = make_topology(ck.rc, env->obs_dim(), env->message_dim(),
                                       env->num_agents(), env->num_actions());
  for (int i = 0; i < env->num_agents(); ++i) {
    QNet net(ck.rc.mode, ck.rc.p, topo.layout, topo.f, topo.g, topo.h, scratch);
    const std::string stem = "agent" + std::to_string(i);
    const auto load_into = [&](const std::string& file, Mlp& dst, const std::string& what) {
      const Mlp loaded = load_mlp_file((dir / file).string());
      detail::check_same_shape(loaded, dst, what);
      dst = loaded;
    };
    load_into(stem + "_f.bin", net.f(), stem + " f");
    if (mode_uses_g(ck.rc.mode)) load_into(stem + "_g.bin", net.g(), stem + " g");
    load_into(stem + "_h.bin", net.h(), stem + " h");
    ck.agents.emplace_back(ck.rc.dqn, std::move(net));
  }
  return ck;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainResult {
  std::int64_t steps = 0;
  std::int64_t episodes = 0;
  std::vector<DqnAgent> agents;
  std::unique_ptr<MaddpgTrainer> trainer;
  std::unique_ptr<Autoencoder> codec_model;
  std::unique_ptr<AutoencoderCodec> codec;
};

namespace detail {

/// Rolling per-episode statistics over the most recent <= 20 episodes.
class EpisodeWindow {
 public:
  void add(double ep_return, double ep_catches) {
    window_.push_back({ep_return, ep_catches});
    if (window_.size() > 20) window_.pop_front();
  }
  double mean_return() const { return mean([](const auto& e) { return e.first; }); }
  double mean_catches() const { return mean([](const auto& e) { return e.second; }); }

 private:
  template <typename F>
  double mean(F field) const {
    if (window_.empty()) return 0.0;
    double total = 0.0;
    for (const auto& e : window_) total += field(e);
    return total / static_cast<double>(window_.size());
  }
  std::deque<std::pair<double, double>> window_;
};

inline double mean_of(const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  return v.empty() ? 0.0 : total / static_cast<double>(v.size());
}

}  // namespace detail

/// The discrete training loop: per-tick message exchange, per-agent
/// epsilon-greedy actions, joint storage, per-agent masked minibatch updates.
inline TrainResult train_discrete(const RunConfig& rc, MetricsWriter& metrics,
                                  const std::string& checkpoint_dir = "") {
  TrainResult out;
  const std::unique_ptr<DiscreteEnv> env = make_discrete_env(rc);
  if (!rc.ae_checkpoint.empty()) {
    std::ifstream is(rc.ae_checkpoint, std::ios::binary);
    if (!is) throw std::runtime_error("train: cannot read autoencoder " + rc.ae_checkpoint);
    out.codec_model = std::make_unique<Autoencoder>(Autoencoder::load(is));
    if (out.codec_model->input_dim() != env->obs_dim())
      throw std::runtime_error("train: autoencoder input dim does not match the environment");
    out.codec = std::make_unique<AutoencoderCodec>(*out.codec_model);
    env->set_message_encoder(out.codec.get());
  }

  Rng rng_init = Rng::stream(rc.seed, rng_tag::kInit);
  Rng rng_env = Rng::stream(rc.seed, rng_tag::kEnv);
  Rng rng_explore = Rng::stream(rc.seed, rng_tag::kExplore);
  Rng rng_batch = Rng::stream(rc.seed, rng_tag::kMinibatch);
  Rng rng_mask = Rng::stream(rc.seed, rng_tag::kMask);

  out.agents = make_discrete_agents(rc, *env, rng_init);
  const int n = env->num_agents();
  const bool messages = mode_uses_messages(rc.mode);
  const bool compress = out.codec != nullptr;
  ReplayBuffer<JointRecord> buffer(rc.effective_replay_capacity());
  const int warmup = rc.effective_warmup();

  const auto observe_all = [&]() {
    std::vector<std::vector<double>> obs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) obs[static_cast<std::size_t>(i)] = env->observe(i);
    return obs;
  };
  const auto compress_all = [&](const std::vector<std::vector<double>>& obs) {
    std::vector<std::vector<double>> msgs;
    if (!compress) return msgs;  // messages are the observations themselves
    msgs.resize(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) msgs[i] = out.codec->encode(obs[i]);
    return msgs;
  };

  env->reset(rng_env.next_u64());
  std::vector<std::vector<double>> obs_t = observe_all();
  std::vector<std::vector<double>> msgs_t = compress_all(obs_t);

  detail::EpisodeWindow window;
  double ep_return = 0.0, ep_catches = 0.0;
  double last_loss = 0.0;
  std::vector<int> actions(static_cast<std::size_t>(n));
  std::vector<Transition> batch;

  for (std::int64_t step = 1; step <= rc.total_steps; ++step) {
    const double eps = rc.dqn.eps.value(step - 1);
    const std::vector<std::vector<double>>& outgoing = compress ? msgs_t : obs_t;
    for (int i = 0; i < n; ++i) {
      const std::vector<double> m =
          messages ? gather_messages(outgoing, i) : std::vector<double>{};
      actions[static_cast<std::size_t>(i)] =
          out.agents[static_cast<std::size_t>(i)].act(obs_t[static_cast<std::size_t>(i)], m,
                                                      eps, rng_explore);
    }

    const EnvStep r = env->step(actions);
    const std::vector<std::vector<double>> msgs_next = compress_all(r.observations);

    JointRecord rec;
    rec.obs = obs_t;
    rec.obs_next = r.observations;
    rec.msgs = msgs_t;
    rec.msgs_next = msgs_next;
    rec.actions = actions;
    rec.rewards = r.rewards;
    rec.terminal = r.terminal;
    buffer.push(std::move(rec));

    ep_return += detail::mean_of(r.rewards);
    ep_catches += r.captures;

    if (r.terminal) {
      window.add(ep_return, ep_catches);
      ++out.episodes;
      ep_return = 0.0;
      ep_catches = 0.0;
      env->reset(rng_env.next_u64());
      obs_t = observe_all();
      msgs_t = compress_all(obs_t);
    } else {
      obs_t = r.observations;
      msgs_t = msgs_next;
    }

    if (static_cast<int>(buffer.size()) >= warmup && step % rc.dqn.train_every == 0) {
      double loss_sum = 0.0;
      for (int i = 0; i < n; ++i) {
        const std::vector<const JointRecord*> sampled =
            buffer.sample(static_cast<std::size_t>(rc.dqn.batch_size), rng_batch);
        batch.clear();
        for (const JointRecord* recp : sampled) batch.push_back(materialize(*recp, i, messages));
        loss_sum += out.agents[static_cast<std::size_t>(i)].train_step(batch, rng_mask);
      }
      last_loss = loss_sum / n;
    }

    if (step % rc.metrics_every == 0 || step == rc.total_steps) {
      MetricsRow row;
      row.run_id = rc.run_id();
      row.seed = rc.seed;
      row.mode = mode_name(rc.mode);
      row.p = rc.p;
      row.env = rc.env_name;
      row.step = step;
      row.episodes_done = out.episodes;
      row.mean_return = window.mean_return();
      row.catches = window.mean_catches();
      row.loss = last_loss;
      row.eps = eps;
      metrics.append(row);
    }
    if (!checkpoint_dir.empty() && rc.checkpoint_every > 0 && step % rc.checkpoint_every == 0)
      save_checkpoint(checkpoint_dir, rc, out.agents, step, out.codec_model.get());
  }
  out.steps = rc.total_steps;
  if (!checkpoint_dir.empty())
    save_checkpoint(checkpoint_dir, rc, out.agents, rc.total_steps, out.codec_model.get());
  return out;
}

/// The waterworld training loop: shared actor/critic, critic updates every
/// critic_every steps and actor updates every actor_every steps.
inline TrainResult train_continuous(const RunConfig& rc, MetricsWriter& metrics,
                                    const std::string& checkpoint_dir = "") {
  TrainResult out;
  WaterworldEnv env(rc.water);

  Rng rng_init = Rng::stream(rc.seed, rng_tag::kInit);
  Rng rng_env = Rng::stream(rc.seed, rng_tag::kEnv);
  Rng rng_explore = Rng::stream(rc.seed, rng_tag::kExplore);
  Rng rng_batch = Rng::stream(rc.seed, rng_tag::kMinibatch);
  Rng rng_mask = Rng::stream(rc.seed, rng_tag::kMask);

  const int n = env.num_agents();
  out.trainer = std::make_unique<MaddpgTrainer>(rc.ddpg, n, env.obs_dim(), 2, rng_init);
  ReplayBuffer<JointTransition> buffer(rc.effective_replay_capacity());
  const int warmup = rc.effective_warmup();

  const auto observe_all = [&]() {
    std::vector<std::vector<double>> obs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) obs[static_cast<std::size_t>(i)] = env.observe(i);
    return obs;
  };

  env.reset(rng_env.next_u64());
  std::vector<std::vector<double>> obs_t = observe_all();

  detail::EpisodeWindow window;
  double ep_return = 0.0, ep_catches = 0.0;
  double last_loss = 0.0;

  for (std::int64_t step = 1; step <= rc.total_steps; ++step) {
    const std::vector<std::vector<double>> acts =
        out.trainer->act(obs_t, rc.ddpg.sigma, rng_explore);
    std::vector<std::array<double, 2>> joint(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      joint[static_cast<std::size_t>(i)] = {acts[static_cast<std::size_t>(i)][0],
                                            acts[static_cast<std::size_t>(i)][1]};

    const EnvStep r = env.step(joint);

    JointTransition rec;
    rec.obs = obs_t;
    rec.actions = acts;
    rec.rewards = r.rewards;
    rec.obs_next = r.observations;
    rec.terminal = r.terminal;
    buffer.push(std::move(rec));

    ep_return += detail::mean_of(r.rewards);
    ep_catches += r.captures;

    if (r.terminal) {
      window.add(ep_return, ep_catches);
      ++out.episodes;
      ep_return = 0.0;
      ep_catches = 0.0;
      env.reset(rng_env.next_u64());
      obs_t = observe_all();
    } else {
      obs_t = r.observations;
    }

    if (static_cast<int>(buffer.size()) >= warmup) {
      if (step % rc.ddpg.critic_every == 0) {
        const auto sampled = buffer.sample(static_cast<std::size_t>(rc.ddpg.batch_size), rng_batch);
        last_loss = out.trainer->critic_step(sampled, rng_mask);
      }
      if (step % rc.ddpg.actor_every == 0) {
        const auto sampled = buffer.sample(static_cast<std::size_t>(rc.ddpg.batch_size), rng_batch);
        out.trainer->actor_step(sampled, rng_mask);
      }
    }

    if (step % rc.metrics_every == 0 || step == rc.total_steps) {
      MetricsRow row;
      row.run_id = rc.run_id();
      row.seed = rc.seed;
      row.mode = kind_name(rc.kind);
      row.p = rc.p;
      row.env = rc.env_name;
      row.step = step;
      row.episodes_done = out.episodes;
      row.mean_return = window.mean_return();
      row.catches = window.mean_catches();
      row.loss = last_loss;
      row.eps = rc.ddpg.sigma;
      metrics.append(row);
    }
    if (!checkpoint_dir.empty() && rc.checkpoint_every > 0 && step % rc.checkpoint_every == 0)
      save_checkpoint(checkpoint_dir, rc, *out.trainer, step);
  }
  out.steps = rc.total_steps;
  if (!checkpoint_dir.empty()) save_checkpoint(checkpoint_dir, rc, *out.trainer, rc.total_steps);
  return out;
}

inline TrainResult run_training(const RunConfig& rc, MetricsWriter& metrics,
                                const std::string& checkpoint_dir = "") {
  return rc.continuous() ? train_continuous(rc, metrics, checkpoint_dir)
                         : train_discrete(rc, metrics, checkpoint_dir);
}

/// Full run with on-disk artifacts: <out_dir>/metrics.csv and
/// <out_dir>/checkpoint/.
inline TrainResult run_training_to_dir(const RunConfig& rc, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string metrics_path = (std::filesystem::path(out_dir) / "metrics.csv").string();
  std::ofstream os(metrics_path, std::ios::binary);
  if (!os) throw std::runtime_error("train: cannot write " + metrics_path);
  MetricsWriter metrics(os);
  TrainResult result =
      run_training(rc, metrics, (std::filesystem::path(out_dir) / "checkpoint").string());
  if (!os.good()) throw std::runtime_error("train: metrics write failed");
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalSummary {
  int episodes = 0;
  double mean_return = 0.0, std_return = 0.0;
  double mean_catches = 0.0, std_catches = 0.0;
};

namespace detail {

inline EvalSummary summarize(const std::vector<double>& returns,
                             const std::vector<double>& catches) {
  EvalSummary s;
  s.episodes = static_cast<int>(returns.size());
  s.mean_return = mean_of(returns);
  s.mean_catches = mean_of(catches);
  double vr = 0.0, vc = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    vr += (returns[i] - s.mean_return) * (returns[i] - s.mean_return);
    vc += (catches[i] - s.mean_catches) * (catches[i] - s.mean_catches);
  }
  if (!returns.empty()) {
    s.std_return = std::sqrt(vr / static_cast<double>(returns.size()));
    s.std_catches = std::sqrt(vc / static_cast<double>(returns.size()));
  }
  return s;
}

}  // namespace detail

/// Greedy evaluation (eps = 0) with execution-time scaling. Broken links
/// deliver zero vectors in place of messages, installed before the scaling.
/// Never trains: agents are read-only.
inline EvalSummary evaluate(const std::vector<DqnAgent>& agents, DiscreteEnv& env, int episodes,
                            const LinkFailure& failure, std::uint64_t seed) {
  if (agents.empty() || static_cast<int>(agents.size()) != env.num_agents())
    throw std::invalid_argument("eval: one agent per environment slot required");
  const int n = env.num_agents();
  const bool messages = mode_uses_messages(agents.front().config().mode);

  Rng rng_env = Rng::stream(seed, rng_tag::kEvalEnv);
  Rng rng_act = Rng::stream(seed, rng_tag::kEvalAct);
  Rng rng_link = Rng::stream(seed, rng_tag::kLink);
  LinkState links(failure, n, rng_link);

  std::vector<double> returns, catches;
  std::vector<int> actions(static_cast<std::size_t>(n));
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng_env.next_u64());
    double ep_return = 0.0, ep_catches = 0.0;
    bool terminal = false;
    while (!terminal) {
      links.begin_step(rng_link);
      std::vector<std::vector<double>> outgoing(static_cast<std::size_t>(n));
      if (messages)
        for (int j = 0; j < n; ++j) outgoing[static_cast<std::size_t>(j)] = env.message_of(j);
      for (int i = 0; i < n; ++i) {
        const std::vector<double> m =
            messages ? gather_messages(outgoing, i, &links) : std::vector<double>{};
        actions[static_cast<std::size_t>(i)] =
            agents[static_cast<std::size_t>(i)].act(env.observe(i), m, 0.0, rng_act);
      }
      const EnvStep r = env.step(actions);
      ep_return += detail::mean_of(r.rewards);
      ep_catches += r.captures;
      terminal = r.terminal;
    }
    returns.push_back(ep_return);
    catches.push_back(ep_catches);
  }
  return detail::summarize(returns, catches);
}

/// Deterministic-policy waterworld evaluation. The policies are decentralized
/// at execution, so link failure has no channel to act on.
inline EvalSummary evaluate(const MaddpgTrainer& trainer, WaterworldEnv& env, int episodes,
                            std::uint64_t seed) {
  const int n = env.num_agents();
  Rng rng_env = Rng::stream(seed, rng_tag::kEvalEnv);
  Rng rng_act = Rng::stream(seed, rng_tag::kEvalAct);

  std::vector<double> returns, catches;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng_env.next_u64());
    std::vector<std::vector<double>> obs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) obs[static_cast<std::size_t>(i)] = env.observe(i);
    double ep_return = 0.0, ep_catches = 0.0;
    bool terminal = false;
    while (!terminal) {
      const std::vector<std::vector<double>> acts = trainer.act(obs, 0.0, rng_act);
      std::vector<std::array<double, 2>> joint(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        joint[static_cast<std::size_t>(i)] = {acts[static_cast<std::size_t>(i)][0],
                                              acts[static_cast<std::size_t>(i)][1]};
      const EnvStep r = env.step(joint);
      ep_return += detail::mean_of(r.rewards);
      ep_catches += r.captures;
      terminal = r.terminal;
      obs = r.observations;
    }
    returns.push_back(ep_return);
    catches.push_back(ep_catches);
  }
  return detail::summarize(returns, catches);
}

/// Evaluate a checkpoint directory against a fresh environment.
inline EvalSummary evaluate_checkpoint(Checkpoint& ck, int episodes, const LinkFailure& failure,
                                       std::uint64_t seed) {
  if (ck.rc.continuous()) {
    if (failure.kind != LinkFailure::Kind::None)
      throw std::invalid_argument("eval: link failure applies to message-passing policies only");
    WaterworldEnv env(ck.rc.water);
    return evaluate(*ck.trainer, env, episodes, seed);
  }
  const std::unique_ptr<DiscreteEnv> env = make_discrete_env(ck.rc);
  if (ck.codec) env->set_message_encoder(ck.codec.get());
  return evaluate(ck.agents, *env, episodes, failure, seed);
}

// ---------------------------------------------------------------------------
// Dropout-rate sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  double p = 0.0;
  std::uint64_t seed = 0;
  EvalSummary eval;
};

struct SweepAggregate {
  double p = 0.0;
  int seeds = 0;
  double mean_return = 0.0, std_return = 0.0;
  double mean_catches = 0.0, std_catches = 0.0;
};

inline std::vector<SweepAggregate> aggregate_sweep(const std::vector<SweepRow>& rows) {
  std::vector<SweepAggregate> out;
  std::vector<double> ps;
  for (const SweepRow& r : rows)
    if (std::find(ps.begin(), ps.end(), r.p) == ps.end()) ps.push_back(r.p);
  for (double p : ps) {
    std::vector<double> returns, catches;
    for (const SweepRow& r : rows)
      if (r.p == p) {
        returns.push_back(r.eval.mean_return);
        catches.push_back(r.eval.mean_catches);
      }
    const EvalSummary s = detail::summarize(returns, catches);
    out.push_back({p, s.episodes, s.mean_return, s.std_return, s.mean_catches, s.std_catches});
  }
  return out;
}

/// Cross product of dropout rates and seeds; each cell is a full training run
/// plus a greedy evaluation. Raw rows land in <out_root>/sweep_raw.csv, the
/// per-p aggregation in <out_root>/sweep_agg.csv.
inline std::vector<SweepRow> run_sweep(const RunConfig& base, const std::vector<double>& ps,
                                       int n_seeds, const std::string& out_root) {
  if (ps.empty() || n_seeds <= 0) throw std::invalid_argument("sweep: need rates and seeds");
  std::filesystem::create_directories(out_root);
  std::vector<SweepRow> rows;

  const std::string raw_path = (std::filesystem::path(out_root) / "sweep_raw.csv").string();
  std::ofstream raw_os(raw_path, std::ios::binary);
  if (!raw_os) throw std::runtime_error("sweep: cannot write " + raw_path);
  MetricsWriter raw(raw_os);

  for (double p : ps) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sweep: p must lie in [0, 1]");
    for (int k = 0; k < n_seeds; ++k) {
      RunConfig rc = base;
      rc.p = p;
      rc.dqn.p = p;
      rc.ddpg.p = p;
      rc.seed = base.seed + static_cast<std::uint64_t>(k);
      const std::string run_dir =
          (std::filesystem::path(out_root) / rc.run_id()).string();
      TrainResult result = run_training_to_dir(rc, run_dir);

      EvalSummary eval;
      if (rc.continuous()) {
        WaterworldEnv env(rc.water);
        eval = evaluate(*result.trainer, env, rc.eval_episodes, rc.seed);
      } else {
        const std::unique_ptr<DiscreteEnv> env = make_discrete_env(rc);
        if (result.codec) env->set_message_encoder(result.codec.get());
        eval = evaluate(result.agents, *env, rc.eval_episodes, LinkFailure{}, rc.seed);
      }
      rows.push_back({p, rc.seed, eval});

      MetricsRow row;
      row.run_id = rc.run_id();
      row.seed = rc.seed;
      row.mode = rc.continuous() ? kind_name(rc.kind) : mode_name(rc.mode);
      row.p = p;
      row.env = rc.env_name;
      row.step = rc.total_steps;
      row.episodes_done = rc.eval_episodes;
      row.mean_return = eval.mean_return;
      row.catches = eval.mean_catches;
      row.loss = 0.0;
      row.eps = 0.0;
      raw.append(row);
    }
  }
  if (!raw_os.good()) throw std::runtime_error("sweep: raw csv write failed");

  const std::string agg_path = (std::filesystem::path(out_root) / "sweep_agg.csv").string();
  std::ofstream agg(agg_path, std::ios::binary);
  if (!agg) throw std::runtime_error("sweep: cannot write " + agg_path);
  agg << "p,seeds,mean_return,std_return,mean_catches,std_catches\n";
  for (const SweepAggregate& a : aggregate_sweep(rows))
    agg << format_double(a.p) << "," << a.seeds << "," << format_double(a.mean_return) << ","
        << format_double(a.std_return) << "," << format_double(a.mean_catches) << ","
        << format_double(a.std_catches) << "\n";
  if (!agg.good()) throw std::runtime_error("sweep: aggregate csv write failed");
  return rows;
}

// ---------------------------------------------------------------------------
// Autoencoder pretraining
// ---------------------------------------------------------------------------

struct PretrainResult {
  std::unique_ptr<Autoencoder> model;
  int samples = 0;
  double untrained_mse = 0.0;
  double trained_mse = 0.0;
};

/// Collects observations from uniform-random rollouts, then minimizes the
/// reconstruction error. The last tenth of the samples is held out; both the
/// untrained and the trained reconstruction error are reported on it.
inline PretrainResult pretrain_autoencoder(DiscreteEnv& env, int samples, std::uint64_t seed,
                                           int epochs = 5, double lr = 1e-3,
                                           int code_dim = 32, int hidden_dim = 96) {
  if (samples < 20) throw std::invalid_argument("pretrain: need at least 20 samples");
  Rng rng_env = Rng::stream(seed, rng_tag::kEnv);
  Rng rng_act = Rng::stream(seed, rng_tag::kExplore);
  Rng rng_init = Rng::stream(seed, rng_tag::kInit);
  Rng rng_order = Rng::stream(seed, rng_tag::kSamples);

  std::vector<std::vector<double>> data;
  data.reserve(static_cast<std::size_t>(samples));
  env.reset(rng_env.next_u64());
  while (static_cast<int>(data.size()) < samples) {
    for (int i = 0; i < env.num_agents() && static_cast<int>(data.size()) < samples; ++i)
      data.push_back(env.observe(i));
    std::vector<int> actions(static_cast<std::size_t>(env.num_agents()));
    for (int& a : actions) a = rng_act.uniform_int(env.num_actions());
    const EnvStep r = env.step(actions);
    if (r.terminal) env.reset(rng_env.next_u64());
  }

  const std::size_t held = static_cast<std::size_t>(samples) / 10;
  const std::size_t train_n = data.size() - held;
  const std::vector<std::vector<double>> heldout(data.begin() + static_cast<std::ptrdiff_t>(train_n),
                                                 data.end());

  PretrainResult out;
  out.samples = samples;
  out.model = std::make_unique<Autoencoder>(env.obs_dim(), code_dim, hidden_dim, rng_init);
  out.untrained_mse = out.model->mse(heldout);

  const std::size_t batch_size = 32;
  std::vector<std::size_t> order(train_n);
  for (std::size_t i = 0; i < train_n; ++i) order[i] = i;
  std::vector<const std::vector<double>*> batch;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng_order.shuffle(order);
    for (std::size_t at = 0; at < train_n; at += batch_size) {
      batch.clear();
      for (std::size_t k = at; k < std::min(at + batch_size, train_n); ++k)
        batch.push_back(&data[order[k]]);
      out.model->train_step(batch, lr);
    }
  }
  out.trained_mse = out.model->mse(heldout);
  return out;
}

}  // namespace dnmd
