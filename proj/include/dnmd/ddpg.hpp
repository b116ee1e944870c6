#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dnmd/masking.hpp"
#include "dnmd/mlp.hpp"
#include "dnmd/rng.hpp"

namespace dnmd {

/// Continuous-control variants.
///
///  DDPG       independent learners: critic sees own observation and action
///  MADDPG     centralized critic over all observations and actions
///  MADDPG_MD  centralized critic with block dropout over the *other*
///             agents' observation blocks (actions are never dropped)
enum class DdpgKind { DDPG, MADDPG, MADDPG_MD };

inline bool kind_centralized(DdpgKind k) { return k != DdpgKind::DDPG; }
inline bool kind_masks(DdpgKind k) { return k == DdpgKind::MADDPG_MD; }

inline const char* kind_name(DdpgKind k) {
  switch (k) {
    case DdpgKind::DDPG: return "ddpg";
    case DdpgKind::MADDPG: return "maddpg";
    case DdpgKind::MADDPG_MD: return "maddpg_md";
  }
  return "?";
}

inline DdpgKind parse_kind(const std::string& s) {
  for (DdpgKind k : {DdpgKind::DDPG, DdpgKind::MADDPG, DdpgKind::MADDPG_MD})
    if (s == kind_name(k)) return k;
  throw std::invalid_argument("unknown ddpg kind: " + s);
}

/// One joint environment step as the continuous-control replay payload.
struct JointTransition {
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<double>> actions;
  std::vector<double> rewards;
  std::vector<std::vector<double>> obs_next;
  bool terminal = false;

  bool shape_matches(const JointTransition& other) const {
    if (obs.size() != other.obs.size() || actions.size() != other.actions.size() ||
        obs_next.size() != other.obs_next.size() || rewards.size() != other.rewards.size())
      return false;
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (obs[i].size() != other.obs[i].size() ||
          obs_next[i].size() != other.obs_next[i].size() ||
          actions[i].size() != other.actions[i].size())
        return false;
    return true;
  }
};

struct CriticCache {
  ForwardCache f1, f2, g, h;
};

class CriticNet;

struct CriticGrads {
  Gradients f1, f2, g, h;

  CriticGrads() = default;
  explicit CriticGrads(const CriticNet& net);
  void zero() {
    f1.zero();
    f2.zero();
    g.zero();
    h.zero();
  }
};

/// Action-value network Q(x, a) = h(f2(f1(o_own || a_own) || a_own) || g(o_others || a_others)).
/// The own action enters twice: at the input and again at the first hidden
/// layer. The independent variant drops the g branch and ignores the other
/// agents entirely. Observation masking happens in the caller; actions are
/// passed unmasked.
class CriticNet {
 public:
  CriticNet() = default;

  CriticNet(DdpgKind kind, int n_agents, int obs_dim, int act_dim, Rng& init_rng)
      : kind_(kind), n_agents_(n_agents), obs_dim_(obs_dim), act_dim_(act_dim) {
    if (n_agents < 1 || obs_dim < 1 || act_dim < 1)
      throw std::invalid_argument("critic: bad dimensions");
    if (kind_centralized(kind) && n_agents < 2)
      throw std::invalid_argument("critic: centralized kind needs at least two agents");
    std::vector<std::pair<int, int>> blocks;
    for (int j = 0; j < n_agents - 1; ++j) blocks.push_back({j, obs_dim});
    layout_ = BlockLayout::make(obs_dim, blocks);

    f1_ = Mlp({{obs_dim + act_dim, 200, Activation::Relu}}, init_rng);
    f2_ = Mlp({{200 + act_dim, 100, Activation::Relu}}, init_rng);
    if (kind_centralized(kind)) {
      g_ = Mlp({{(n_agents - 1) * (obs_dim + act_dim), 100, Activation::Relu}}, init_rng);
      h_ = Mlp({{200, 64, Activation::Relu}, {64, 1, Activation::Linear}}, init_rng);
    } else {
      h_ = Mlp({{100, 64, Activation::Relu}, {64, 1, Activation::Linear}}, init_rng);
    }
  }

  DdpgKind kind() const { return kind_; }
  int n_agents() const { return n_agents_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  /// Layout over x = (own obs || other agents' obs), the masking domain.
  const BlockLayout& layout() const { return layout_; }

  /// x is (own obs || others' obs, possibly masked); a_own the agent's
  /// action; a_others the other agents' actions concatenated in x's order.
  double forward(std::span<const double> x, std::span<const double> a_own,
                 std::span<const double> a_others, CriticCache* cache = nullptr) const {
    if (static_cast<int>(x.size()) != layout_.total_dim)
      throw std::invalid_argument("critic: x dimension mismatch");
    if (static_cast<int>(a_own.size()) != act_dim_)
      throw std::invalid_argument("critic: own action dimension mismatch");
    if (static_cast<int>(a_others.size()) != (n_agents_ - 1) * act_dim_)
      throw std::invalid_argument("critic: other-action dimension mismatch");

    std::vector<double> f1_in(x.begin(), x.begin() + obs_dim_);
    f1_in.insert(f1_in.end(), a_own.begin(), a_own.end());
    const std::vector<double> h1 = f1_.forward(f1_in, cache ? &cache->f1 : nullptr);

    std::vector<double> f2_in = h1;
    f2_in.insert(f2_in.end(), a_own.begin(), a_own.end());
    std::vector<double> head = f2_.forward(f2_in, cache ? &cache->f2 : nullptr);

    if (kind_centralized(kind_)) {
      std::vector<double> g_in(x.begin() + obs_dim_, x.end());
      g_in.insert(g_in.end(), a_others.begin(), a_others.end());
      const std::vector<double> gg = g_.forward(g_in, cache ? &cache->g : nullptr);
      head.insert(head.end(), gg.begin(), gg.end());
    }
    return h_.forward(head, cache ? &cache->h : nullptr)[0];
  }

  struct BackwardResult {
    std::vector<double> da_own;  // both injection points summed
    std::vector<double> dx;      // gradient w.r.t. the (masked) x vector
  };

  /// Accumulates parameter gradients for loss with dLoss/dQ = dl_dq.
  BackwardResult backward(const CriticCache& cache, double dl_dq, CriticGrads& grads) const {
    const std::vector<double> dhead =
        h_.backward(cache.h, std::vector<double>{dl_dq}, grads.h);

    BackwardResult out;
    out.da_own.assign(static_cast<std::size_t>(act_dim_), 0.0);
    out.dx.assign(static_cast<std::size_t>(layout_.total_dim), 0.0);

    const std::span<const double> dh(dhead);
    const std::size_t f1_out = static_cast<std::size_t>(f1_.output_dim());
    const std::size_t f2_out = static_cast<std::size_t>(f2_.output_dim());
    const std::vector<double> df2_in =
        f2_.backward(cache.f2, dh.subspan(0, f2_out), grads.f2);
    for (int k = 0; k < act_dim_; ++k)
      out.da_own[static_cast<std::size_t>(k)] += df2_in[f1_out + static_cast<std::size_t>(k)];

    const std::vector<double> df1_in = f1_.backward(
        cache.f1, std::span<const double>(df2_in).subspan(0, f1_out), grads.f1);
    for (int k = 0; k < obs_dim_; ++k) out.dx[static_cast<std::size_t>(k)] = df1_in[static_cast<std::size_t>(k)];
    for (int k = 0; k < act_dim_; ++k)
      out.da_own[static_cast<std::size_t>(k)] += df1_in[static_cast<std::size_t>(obs_dim_ + k)];

    if (kind_centralized(kind_)) {
      const std::vector<double> dg_in = g_.backward(cache.g, dh.subspan(f2_out), grads.g);
      const int others_obs = (n_agents_ - 1) * obs_dim_;
      for (int k = 0; k < others_obs; ++k)
        out.dx[static_cast<std::size_t>(obs_dim_ + k)] = dg_in[static_cast<std::size_t>(k)];
    }
    return out;
  }

  const Mlp& f1() const { return f1_; }
  const Mlp& f2() const { return f2_; }
  const Mlp& g() const { return g_; }
  const Mlp& h() const { return h_; }
  Mlp& f1() { return f1_; }
  Mlp& f2() { return f2_; }
  Mlp& g() { return g_; }
  Mlp& h() { return h_; }

  bool operator==(const CriticNet&) const = default;

 private:
  DdpgKind kind_ = DdpgKind::MADDPG;
  int n_agents_ = 0;
  int obs_dim_ = 0;
  int act_dim_ = 0;
  BlockLayout layout_;
  Mlp f1_, f2_, g_, h_;
};

inline CriticGrads::CriticGrads(const CriticNet& net)
    : f1(net.f1()),
      f2(net.f2()),
      g(kind_centralized(net.kind()) ? Gradients(net.g()) : Gradients{}),
      h(net.h()) {}

struct DdpgConfig {
  DdpgKind kind = DdpgKind::MADDPG_MD;
  double p = 0.2;
  double gamma = 0.95;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  int batch_size = 32;
  int critic_every = 5;          // environment steps between critic updates
  int actor_every = 10;          // environment steps between actor updates
  int target_sync_every = 500;   // critic updates between hard target syncs
  double sigma = 0.15;           // exploration noise stddev
};

/// Parameter-shared actor-critic trainer: all agents run the same actor and
/// the same critic, each agent contributing its own view (own block first,
/// remaining agents in ascending index order).
class MaddpgTrainer {
 public:
  MaddpgTrainer(const DdpgConfig& cfg, int n_agents, int obs_dim, int act_dim, Rng& init_rng)
      : cfg_(cfg),
        n_agents_(n_agents),
        obs_dim_(obs_dim),
        act_dim_(act_dim),
        actor_({{obs_dim, 64, Activation::Relu}, {64, act_dim, Activation::Tanh}}, init_rng),
        critic_(cfg.kind, n_agents, obs_dim, act_dim, init_rng),
        actor_target_(actor_),
        critic_target_(critic_),
        adam_actor_(actor_),
        adam_f1_(critic_.f1()),
        adam_f2_(critic_.f2()),
        adam_g_(kind_centralized(cfg.kind) ? AdamState(critic_.g()) : AdamState{}),
        adam_h_(critic_.h()) {}

  /// Per-agent exploration actions: tanh policy output plus Gaussian noise,
  /// clamped back into [-1, 1]. sigma = 0 gives the deterministic policy.
  std::vector<std::vector<double>> act(const std::vector<std::vector<double>>& obs,
                                       double sigma, Rng& rng) const {
    if (static_cast<int>(obs.size()) != n_agents_)
      throw std::invalid_argument("ddpg: one observation per agent required");
    std::vector<std::vector<double>> actions(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      actions[i] = actor_.forward(obs[i]);
      for (double& a : actions[i])
        a = std::clamp(a + sigma * rng.normal(), -1.0, 1.0);
    }
    return actions;
  }

  /// One critic minibatch update. Target actions come from the target actor
  /// on *unmasked* next observations; per (item, agent) one observation mask
  /// is drawn and applied to both the current and next critic input.
  /// Returns the batch MSE.
  double critic_step(const std::vector<const JointTransition*>& batch, Rng& mask_rng) {
    if (batch.empty()) throw std::invalid_argument("ddpg: empty batch");
    CriticGrads grads(critic_);
    const double inv = 1.0 / (static_cast<double>(batch.size()) * n_agents_);
    double loss = 0.0;

    for (const JointTransition* item : batch) {
      check_item(*item);
      std::vector<std::vector<double>> a_next(static_cast<std::size_t>(n_agents_));
      for (int j = 0; j < n_agents_; ++j)
        a_next[static_cast<std::size_t>(j)] =
            actor_target_.forward(item->obs_next[static_cast<std::size_t>(j)]);

      for (int i = 0; i < n_agents_; ++i) {
        const std::vector<double> x = view_of(item->obs, i);
        const std::vector<double> xn = view_of(item->obs_next, i);
        std::vector<double> xt = x, xnt = xn;
        if (kind_masks(cfg_.kind)) {
          const BlockMask mask = sample_block_mask(critic_.layout(), cfg_.p, false, mask_rng);
          xt = apply_mask(x, critic_.layout(), mask);
          xnt = apply_mask(xn, critic_.layout(), mask);
        }
        const std::vector<double> a_own(item->actions[static_cast<std::size_t>(i)]);
        const std::vector<double> a_others = actions_of_others(item->actions, i);

        double y = item->rewards[static_cast<std::size_t>(i)];
        if (!item->terminal) {
          const std::vector<double> an_others = actions_of_others(a_next, i);
          y += cfg_.gamma *
               critic_target_.forward(xnt, a_next[static_cast<std::size_t>(i)], an_others);
        }

        CriticCache cache;
        const double q = critic_.forward(xt, a_own, a_others, &cache);
        const double err = q - y;
        loss += err * err;
        critic_.backward(cache, 2.0 * err * inv, grads);
      }
    }

    adam_f1_.step(critic_.f1(), grads.f1, cfg_.lr_critic);
    adam_f2_.step(critic_.f2(), grads.f2, cfg_.lr_critic);
    if (kind_centralized(cfg_.kind)) adam_g_.step(critic_.g(), grads.g, cfg_.lr_critic);
    adam_h_.step(critic_.h(), grads.h, cfg_.lr_critic);
    ++critic_updates_;
    if (critic_updates_ % cfg_.target_sync_every == 0) sync_targets();
    return loss * inv;
  }

  /// One actor minibatch update: ascend Q(x~, a) in the own-action slot with
  /// fresh observation masks, other agents' actions taken from the buffer.
  void actor_step(const std::vector<const JointTransition*>& batch, Rng& mask_rng) {
    if (batch.empty()) throw std::invalid_argument("ddpg: empty batch");
    Gradients ga(actor_);
    CriticGrads scratch(critic_);  // parameter grads of the critic are discarded
    const double inv = 1.0 / (static_cast<double>(batch.size()) * n_agents_);

    for (const JointTransition* item : batch) {
      check_item(*item);
      for (int i = 0; i < n_agents_; ++i) {
        std::vector<double> x = view_of(item->obs, i);
        if (kind_masks(cfg_.kind)) {
          const BlockMask mask = sample_block_mask(critic_.layout(), cfg_.p, false, mask_rng);
          x = apply_mask(x, critic_.layout(), mask);
        }
        ForwardCache actor_cache;
        const std::vector<double> a_own =
            actor_.forward(item->obs[static_cast<std::size_t>(i)], &actor_cache);
        const std::vector<double> a_others = actions_of_others(item->actions, i);

        CriticCache critic_cache;
        critic_.forward(x, a_own, a_others, &critic_cache);
        const CriticNet::BackwardResult back = critic_.backward(critic_cache, 1.0, scratch);

        std::vector<double> dl(static_cast<std::size_t>(act_dim_));
        for (int k = 0; k < act_dim_; ++k)
          dl[static_cast<std::size_t>(k)] = -back.da_own[static_cast<std::size_t>(k)] * inv;
        actor_.backward(actor_cache, dl, ga);
      }
    }
    adam_actor_.step(actor_, ga, cfg_.lr_actor);
  }

  void sync_targets() {
    actor_target_ = actor_;
    critic_target_ = critic_;
  }

  const DdpgConfig& config() const { return cfg_; }
  int n_agents() const { return n_agents_; }
  const Mlp& actor() const { return actor_; }
  Mlp& actor() { return actor_; }
  const CriticNet& critic() const { return critic_; }
  CriticNet& critic() { return critic_; }
  const Mlp& actor_target() const { return actor_target_; }
  const CriticNet& critic_target() const { return critic_target_; }
  std::int64_t critic_updates() const { return critic_updates_; }

  /// Agent i's critic view: own observation first, the others ascending.
  std::vector<double> view_of(const std::vector<std::vector<double>>& obs, int agent) const {
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(n_agents_ * obs_dim_));
    x.insert(x.end(), obs[static_cast<std::size_t>(agent)].begin(),
             obs[static_cast<std::size_t>(agent)].end());
    for (int j = 0; j < n_agents_; ++j) {
      if (j == agent) continue;
      x.insert(x.end(), obs[static_cast<std::size_t>(j)].begin(),
               obs[static_cast<std::size_t>(j)].end());
    }
    return x;
  }

  std::vector<double> actions_of_others(const std::vector<std::vector<double>>& actions,
                                        int agent) const {
    std::vector<double> a;
    a.reserve(static_cast<std::size_t>((n_agents_ - 1) * act_dim_));
    for (int j = 0; j < n_agents_; ++j) {
      if (j == agent) continue;
      a.insert(a.end(), actions[static_cast<std::size_t>(j)].begin(),
               actions[static_cast<std::size_t>(j)].end());
    }
    return a;
  }

 private:
  void check_item(const JointTransition& item) const {
    if (static_cast<int>(item.obs.size()) != n_agents_ ||
        static_cast<int>(item.actions.size()) != n_agents_ ||
        static_cast<int>(item.rewards.size()) != n_agents_ ||
        static_cast<int>(item.obs_next.size()) != n_agents_)
      throw std::invalid_argument("ddpg: transition does not match agent count");
  }

  DdpgConfig cfg_;
  int n_agents_;
  int obs_dim_;
  int act_dim_;
  Mlp actor_;
  CriticNet critic_;
  Mlp actor_target_;
  CriticNet critic_target_;
  AdamState adam_actor_, adam_f1_, adam_f2_, adam_g_, adam_h_;
  std::int64_t critic_updates_ = 0;
};

}  // namespace dnmd
