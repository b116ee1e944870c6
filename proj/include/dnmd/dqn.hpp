#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dnmd/masking.hpp"
#include "dnmd/mlp.hpp"
#include "dnmd/replay.hpp"
#include "dnmd/rng.hpp"

namespace dnmd {

/// Communication / dropout variants for the discrete-action agents.
///
///  FDC       fully decentralized: no messages at all
///  DCC       communication, no dropout
///  DCC_MD    communication, per-message *block* dropout (the main method)
///  SD        communication, per-element dropout over messages
///  FULL_MD   block dropout over messages and the own observation
///  FULL_SD   element dropout over messages and the own observation
///  CONCAT_MD block dropout, but one monolithic network instead of the
///            factored f/g pair
enum class AgentMode { FDC, DCC, DCC_MD, SD, FULL_MD, FULL_SD, CONCAT_MD };

inline bool mode_uses_messages(AgentMode m) { return m != AgentMode::FDC; }
inline bool mode_uses_g(AgentMode m) {
  return m != AgentMode::FDC && m != AgentMode::CONCAT_MD;
}
inline bool mode_masks(AgentMode m) {
  return m == AgentMode::DCC_MD || m == AgentMode::SD || m == AgentMode::FULL_MD ||
         m == AgentMode::FULL_SD || m == AgentMode::CONCAT_MD;
}
inline bool mode_block_dropout(AgentMode m) {
  return m == AgentMode::DCC_MD || m == AgentMode::FULL_MD || m == AgentMode::CONCAT_MD;
}
inline bool mode_drops_own(AgentMode m) {
  return m == AgentMode::FULL_MD || m == AgentMode::FULL_SD;
}

inline const char* mode_name(AgentMode m) {
  switch (m) {
    case AgentMode::FDC: return "fdc";
    case AgentMode::DCC: return "dcc";
    case AgentMode::DCC_MD: return "dcc_md";
    case AgentMode::SD: return "sd";
    case AgentMode::FULL_MD: return "full_md";
    case AgentMode::FULL_SD: return "full_sd";
    case AgentMode::CONCAT_MD: return "concat_md";
  }
  return "?";
}

inline AgentMode parse_mode(const std::string& s) {
  for (AgentMode m : {AgentMode::FDC, AgentMode::DCC, AgentMode::DCC_MD, AgentMode::SD,
                      AgentMode::FULL_MD, AgentMode::FULL_SD, AgentMode::CONCAT_MD})
    if (s == mode_name(m)) return m;
  throw std::invalid_argument("unknown mode: " + s);
}

/// Linear anneal from start to end over anneal_steps environment steps.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.02;
  std::int64_t anneal_steps = 100000;

  double value(std::int64_t env_step) const {
    if (env_step >= anneal_steps) return end;
    if (env_step <= 0) return start;
    return start + (end - start) * static_cast<double>(env_step) /
                       static_cast<double>(anneal_steps);
  }
};

struct QNetCache {
  ForwardCache f, g, h;
};

class QNet;

struct QNetGrads {
  Gradients f, g, h;

  QNetGrads() = default;
  explicit QNetGrads(const QNet& net);
  void zero() {
    f.zero();
    g.zero();
    h.zero();
  }
};

/// Factored action-value network Q(o, m) = h(f(o) || g(m)). The FDC and
/// CONCAT variants collapse to Q = h(f(x)) where x is the own observation or
/// the full concatenated input. Masking and execution-time scaling happen in
/// the caller; forward() sees the input exactly as given.
class QNet {
 public:
  QNet() = default;

  QNet(AgentMode mode, double p, const BlockLayout& layout,
       const std::vector<LayerSpec>& f_specs, const std::vector<LayerSpec>& g_specs,
       const std::vector<LayerSpec>& h_specs, Rng& init_rng)
      : mode_(mode), p_(p), layout_(layout), f_(f_specs, init_rng) {
    if (mode_uses_g(mode)) {
      if (g_specs.empty()) throw std::invalid_argument("qnet: mode needs a g network");
      g_ = Mlp(g_specs, init_rng);
    } else if (!g_specs.empty()) {
      throw std::invalid_argument("qnet: mode does not take a g network");
    }
    h_ = Mlp(h_specs, init_rng);

    const int expected_f_in = mode_uses_g(mode) ? layout.own.length : layout.total_dim;
    if (f_.input_dim() != expected_f_in)
      throw std::invalid_argument("qnet: f input dim does not match layout");
    if (mode_uses_g(mode) && g_.input_dim() != layout.message_dim())
      throw std::invalid_argument("qnet: g input dim does not match layout");
    const int h_in = f_.output_dim() + (mode_uses_g(mode) ? g_.output_dim() : 0);
    if (h_.input_dim() != h_in)
      throw std::invalid_argument("qnet: h input dim does not match f/g outputs");
    if (!mode_uses_messages(mode) && layout.num_message_blocks() != 0)
      throw std::invalid_argument("qnet: fdc layout must not carry message blocks");
  }

  AgentMode mode() const { return mode_; }
  double p() const { return p_; }
  const BlockLayout& layout() const { return layout_; }
  int input_dim() const { return layout_.total_dim; }
  int num_actions() const { return h_.output_dim(); }

  std::vector<double> forward(std::span<const double> x, QNetCache* cache = nullptr) const {
    if (static_cast<int>(x.size()) != layout_.total_dim)
      throw std::invalid_argument("qnet: input dimension mismatch");
    std::vector<double> head;
    if (mode_uses_g(mode_)) {
      const auto own = x.subspan(0, static_cast<std::size_t>(layout_.own.length));
      const auto msg = x.subspan(static_cast<std::size_t>(layout_.own.length));
      head = f_.forward(own, cache ? &cache->f : nullptr);
      const std::vector<double> gm = g_.forward(msg, cache ? &cache->g : nullptr);
      head.insert(head.end(), gm.begin(), gm.end());
    } else {
      head = f_.forward(x, cache ? &cache->f : nullptr);
    }
    return h_.forward(head, cache ? &cache->h : nullptr);
  }

  /// Accumulates parameter gradients and returns dLoss/dInput over the full
  /// input vector.
  std::vector<double> backward(const QNetCache& cache, std::span<const double> dl_dq,
                               QNetGrads& grads) const {
    const std::vector<double> dhead = h_.backward(cache.h, dl_dq, grads.h);
    if (!mode_uses_g(mode_)) return f_.backward(cache.f, dhead, grads.f);

    const std::span<const double> dh(dhead);
    const auto df_out = dh.subspan(0, static_cast<std::size_t>(f_.output_dim()));
    const auto dg_out = dh.subspan(static_cast<std::size_t>(f_.output_dim()));
    std::vector<double> dx = f_.backward(cache.f, df_out, grads.f);
    const std::vector<double> dm = g_.backward(cache.g, dg_out, grads.g);
    dx.insert(dx.end(), dm.begin(), dm.end());
    return dx;
  }

  const Mlp& f() const { return f_; }
  const Mlp& g() const { return g_; }
  const Mlp& h() const { return h_; }
  Mlp& f() { return f_; }
  Mlp& g() { return g_; }
  Mlp& h() { return h_; }

  bool operator==(const QNet&) const = default;

 private:
  AgentMode mode_ = AgentMode::DCC;
  double p_ = 0.0;
  BlockLayout layout_;
  Mlp f_, g_, h_;
};

inline QNetGrads::QNetGrads(const QNet& net)
    : f(net.f()), g(mode_uses_g(net.mode()) ? Gradients(net.g()) : Gradients{}), h(net.h()) {}

inline bool operator==(const BlockLayout::Block& a, const BlockLayout::Block& b) {
  return a.agent_id == b.agent_id && a.offset == b.offset && a.length == b.length;
}
inline bool operator==(const BlockLayout& a, const BlockLayout& b) {
  if (a.total_dim != b.total_dim || !(a.own == b.own) ||
      a.messages.size() != b.messages.size())
    return false;
  for (std::size_t i = 0; i < a.messages.size(); ++i)
    if (!(a.messages[i] == b.messages[i])) return false;
  return true;
}

struct DqnConfig {
  AgentMode mode = AgentMode::DCC_MD;
  double p = 0.2;
  double gamma = 0.99;
  double lr = 1e-4;
  int batch_size = 32;
  int train_every = 4;         // environment steps between updates
  int target_sync_every = 2000;  // updates between hard target syncs
  EpsilonSchedule eps;
};

/// Double-DQN agent over a factored QNet. Training-time message dropout,
/// execution-time rescaling; the target network is a hard copy refreshed
/// every target_sync_every updates.
class DqnAgent {
 public:
  DqnAgent(const DqnConfig& cfg, const BlockLayout& layout,
           const std::vector<LayerSpec>& f_specs, const std::vector<LayerSpec>& g_specs,
           const std::vector<LayerSpec>& h_specs, Rng& init_rng)
      : cfg_(cfg),
        online_(cfg.mode, cfg.p, layout, f_specs, g_specs, h_specs, init_rng),
        target_(online_),
        adam_f_(online_.f()),
        adam_g_(mode_uses_g(cfg.mode) ? AdamState(online_.g()) : AdamState{}),
        adam_h_(online_.h()) {}

  /// Agent built around an existing network (checkpoint restore).
  DqnAgent(const DqnConfig& cfg, QNet net)
      : cfg_(cfg),
        online_(std::move(net)),
        target_(online_),
        adam_f_(online_.f()),
        adam_g_(mode_uses_g(cfg.mode) ? AdamState(online_.g()) : AdamState{}),
        adam_h_(online_.h()) {}

  /// Execution-time action: messages scaled by the keep probability, then
  /// epsilon-greedy on the online network. Ties resolve to the lowest index.
  int act(std::span<const double> o, std::span<const double> m, double eps, Rng& rng) const {
    const std::vector<double> x = assemble(o, m);
    const std::vector<double> q =
        online_.forward(mode_masks(cfg_.mode)
                            ? exec_scale(x, online_.layout(), cfg_.p, mode_drops_own(cfg_.mode))
                            : x);
    const int greedy = static_cast<int>(
        std::max_element(q.begin(), q.end()) - q.begin());
    if (rng.bernoulli(eps)) return rng.uniform_int(online_.num_actions());
    return greedy;
  }

  /// Q-values for an observation plus an already-processed message vector
  /// (masked during training, scaled at execution).
  std::vector<double> q_values(std::span<const double> o,
                               std::span<const double> m_processed) const {
    return online_.forward(assemble(o, m_processed));
  }

  /// Double-Q bootstrap target for one transition given its already-masked
  /// next input: the greedy action comes from the execution-scaled online
  /// network on the raw next input, its value from the target network on the
  /// masked one.
  double td_target(const Transition& item, std::span<const double> masked_next) const {
    if (item.terminal) return item.r;
    const std::vector<double> xn = assemble(item.o_next, item.m_next);
    const std::vector<double> sel_in =
        mode_masks(cfg_.mode)
            ? exec_scale(xn, online_.layout(), cfg_.p, mode_drops_own(cfg_.mode))
            : xn;
    const std::vector<double> q_sel = online_.forward(sel_in);
    const int a_star = static_cast<int>(
        std::max_element(q_sel.begin(), q_sel.end()) - q_sel.begin());
    return item.r + cfg_.gamma * target_.forward(masked_next)[static_cast<std::size_t>(a_star)];
  }

  /// One minibatch update. Per item, one dropout mask is drawn and applied
  /// to both the current and the next input (the mask models one channel
  /// state). Returns the batch MSE loss.
  double train_step(const std::vector<Transition>& batch, Rng& mask_rng) {
    if (batch.empty()) throw std::invalid_argument("dqn: empty batch");
    QNetGrads grads(online_);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;

    for (const Transition& item : batch) {
      const std::vector<double> x = assemble(item.o, item.m);
      const std::vector<double> xn = assemble(item.o_next, item.m_next);

      std::vector<double> xt, xnt;
      if (mode_masks(cfg_.mode)) {
        if (mode_block_dropout(cfg_.mode)) {
          const BlockMask mask =
              sample_block_mask(online_.layout(), cfg_.p, mode_drops_own(cfg_.mode), mask_rng);
          xt = apply_mask(x, online_.layout(), mask);
          xnt = apply_mask(xn, online_.layout(), mask);
        } else {
          const ElementMask mask =
              sample_element_mask(online_.layout(), cfg_.p, mode_drops_own(cfg_.mode), mask_rng);
          xt = apply_mask(x, online_.layout(), mask);
          xnt = apply_mask(xn, online_.layout(), mask);
        }
      } else {
        xt = x;
        xnt = xn;
      }

      const double y = td_target(item, xnt);

      QNetCache cache;
      const std::vector<double> q = online_.forward(xt, &cache);
      const double err = q[static_cast<std::size_t>(item.action)] - y;
      loss += err * err;
      std::vector<double> dl(q.size(), 0.0);
      dl[static_cast<std::size_t>(item.action)] = 2.0 * err * inv_b;
      online_.backward(cache, dl, grads);
    }

    adam_f_.step(online_.f(), grads.f, cfg_.lr);
    if (mode_uses_g(cfg_.mode)) adam_g_.step(online_.g(), grads.g, cfg_.lr);
    adam_h_.step(online_.h(), grads.h, cfg_.lr);
    ++updates_;
    if (updates_ % cfg_.target_sync_every == 0) sync_target();
    return loss * inv_b;
  }

  void sync_target() { target_ = online_; }

  const DqnConfig& config() const { return cfg_; }
  const QNet& online() const { return online_; }
  QNet& online() { return online_; }
  const QNet& target() const { return target_; }
  std::int64_t updates() const { return updates_; }

 private:
  std::vector<double> assemble(std::span<const double> o, std::span<const double> m) const {
    if (static_cast<int>(o.size()) != online_.layout().own.length)
      throw std::invalid_argument("dqn: observation dimension mismatch");
    if (!mode_uses_messages(cfg_.mode)) {
      if (!m.empty()) throw std::invalid_argument("dqn: fdc agents take no messages");
      return std::vector<double>(o.begin(), o.end());
    }
    if (static_cast<int>(m.size()) != online_.layout().message_dim())
      throw std::invalid_argument("dqn: message dimension mismatch");
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(online_.layout().total_dim));
    x.insert(x.end(), o.begin(), o.end());
    x.insert(x.end(), m.begin(), m.end());
    return x;
  }

  DqnConfig cfg_;
  QNet online_;
  QNet target_;
  AdamState adam_f_, adam_g_, adam_h_;
  std::int64_t updates_ = 0;
};

}  // namespace dnmd
