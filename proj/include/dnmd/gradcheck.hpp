#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dnmd/autoencoder.hpp"
#include "dnmd/ddpg.hpp"
#include "dnmd/dqn.hpp"
#include "dnmd/harness.hpp"
#include "dnmd/masking.hpp"
#include "dnmd/mlp.hpp"
#include "dnmd/rng.hpp"

namespace dnmd {

/// Result of one finite-difference sweep over a network topology.
struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t params_checked = 0;
  std::size_t params_skipped = 0;  // probe window straddled a relu kink
};

namespace detail {

constexpr double kFdStep = 1e-6;
constexpr std::size_t kParamsPerNet = 250;

/// Compares analytic gradients of `loss` against central differences on a
/// strided subset of each net's parameters. The loss closure must read the
/// live parameters of `nets` on every call. Probe windows that straddle a
/// relu kink make the two-sided difference meaningless; those are detected
/// through the second difference (which then dominates the discrepancy) and
/// counted as skipped instead of compared.
template <typename LossFn>
void fd_compare(const std::vector<Mlp*>& nets, const std::vector<const Gradients*>& grads,
                LossFn&& loss, GradCheckReport& report) {
  const double mid = loss();
  for (std::size_t ni = 0; ni < nets.size(); ++ni) {
    Mlp& net = *nets[ni];
    const Gradients& g = *grads[ni];
    std::size_t total = 0;
    for (const Layer& L : net.layers()) total += L.w.size() + L.b.size();
    const std::size_t stride =
        total <= kParamsPerNet ? 1 : (total + kParamsPerNet - 1) / kParamsPerNet;

    std::size_t idx = 0;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      Layer& L = net.layers()[l];
      const auto check = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + kFdStep;
        const double up = loss();
        param = saved - kFdStep;
        const double down = loss();
        param = saved;
        const double fd = (up - down) / (2.0 * kFdStep);
        const double rel =
            std::fabs(analytic - fd) / std::max({std::fabs(analytic), std::fabs(fd), 1e-6});
        if (rel > 5e-5) {
          // A kink inside the window produces an FD error of exactly
          // |second difference| / (2h); a wrong analytic gradient does not
          // move the second difference at all.
          const double s2 = up - 2.0 * mid + down;
          if (std::fabs(s2) > kFdStep * std::fabs(analytic - fd)) {
            ++report.params_skipped;
            return;
          }
        }
        if (rel > report.max_rel_err) report.max_rel_err = rel;
        ++report.params_checked;
      };
      for (std::size_t i = 0; i < L.w.size(); ++i, ++idx)
        if (idx % stride == 0) check(L.w[i], g.w[l][i]);
      for (std::size_t i = 0; i < L.b.size(); ++i, ++idx)
        if (idx % stride == 0) check(L.b[i], g.b[l][i]);
    }
  }
}

inline std::vector<double> random_vec(int n, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

/// MSE of a two-item batch against fixed targets, through the full QNet with
/// the training-time masks already applied to the inputs.
inline GradCheckReport check_qnet(const std::string& name, const RunConfig& rc, int obs_dim,
                                  int n_agents, std::uint64_t seed) {
  Rng init(seed);
  const QTopology topo = make_topology(rc, obs_dim, obs_dim, n_agents, 5);
  QNet net(rc.mode, rc.p, topo.layout, topo.f, topo.g, topo.h, init);

  Rng data(seed + 1);
  std::vector<std::vector<double>> xs;
  const std::vector<int> actions{1, 3};
  const std::vector<double> ys{0.7, -0.4};
  for (int k = 0; k < 2; ++k) {
    std::vector<double> x = random_vec(topo.layout.total_dim, data);
    if (mode_masks(rc.mode)) {
      const BlockMask mask = sample_block_mask(topo.layout, rc.p, mode_drops_own(rc.mode), data);
      x = apply_mask(x, topo.layout, mask);
    }
    xs.push_back(std::move(x));
  }

  QNetGrads grads(net);
  const auto loss = [&]() {
    double total = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double q = net.forward(xs[k])[static_cast<std::size_t>(actions[k])];
      total += (q - ys[k]) * (q - ys[k]);
    }
    return total / static_cast<double>(xs.size());
  };
  for (std::size_t k = 0; k < xs.size(); ++k) {
    QNetCache cache;
    const std::vector<double> q = net.forward(xs[k], &cache);
    std::vector<double> dl(q.size(), 0.0);
    dl[static_cast<std::size_t>(actions[k])] =
        2.0 * (q[static_cast<std::size_t>(actions[k])] - ys[k]) / static_cast<double>(xs.size());
    net.backward(cache, dl, grads);
  }

  GradCheckReport report{name, 0.0, 0};
  std::vector<Mlp*> nets{&net.f(), &net.h()};
  std::vector<const Gradients*> gs{&grads.f, &grads.h};
  if (mode_uses_g(rc.mode)) {
    nets.insert(nets.begin() + 1, &net.g());
    gs.insert(gs.begin() + 1, &grads.g);
  }
  fd_compare(nets, gs, loss, report);
  return report;
}

inline GradCheckReport check_critic(const std::string& name, DdpgKind kind, int n_agents,
                                    int obs_dim, std::uint64_t seed) {
  Rng init(seed);
  CriticNet net(kind, n_agents, obs_dim, 2, init);

  Rng data(seed + 1);
  struct Sample {
    std::vector<double> x, a_own, a_others;
    double y;
  };
  std::vector<Sample> samples;
  for (int k = 0; k < 2; ++k) {
    Sample s;
    s.x = random_vec(net.layout().total_dim, data);
    if (kind_masks(kind)) {
      const BlockMask mask = sample_block_mask(net.layout(), 0.5, false, data);
      s.x = apply_mask(s.x, net.layout(), mask);
    }
    s.a_own = random_vec(2, data);
    s.a_others = random_vec((n_agents - 1) * 2, data);
    s.y = data.uniform(-1.0, 1.0);
    samples.push_back(std::move(s));
  }

  CriticGrads grads(net);
  const auto loss = [&]() {
    double total = 0.0;
    for (const Sample& s : samples) {
      const double q = net.forward(s.x, s.a_own, s.a_others);
      total += (q - s.y) * (q - s.y);
    }
    return total / static_cast<double>(samples.size());
  };
  for (const Sample& s : samples) {
    CriticCache cache;
    const double q = net.forward(s.x, s.a_own, s.a_others, &cache);
    net.backward(cache, 2.0 * (q - s.y) / static_cast<double>(samples.size()), grads);
  }

  GradCheckReport report{name, 0.0, 0};
  std::vector<Mlp*> nets{&net.f1(), &net.f2(), &net.h()};
  std::vector<const Gradients*> gs{&grads.f1, &grads.f2, &grads.h};
  if (kind_centralized(kind)) {
    nets.insert(nets.begin() + 2, &net.g());
    gs.insert(gs.begin() + 2, &grads.g);
  }
  fd_compare(nets, gs, loss, report);
  return report;
}

/// Deterministic-policy-gradient path: d/dtheta of -Q(x, mu(o), a_others)
/// through the frozen critic into the actor.
inline GradCheckReport check_actor(const std::string& name, std::uint64_t seed) {
  const int obs_dim = 8, n_agents = 3;
  Rng init(seed);
  Mlp actor({{obs_dim, 64, Activation::Relu}, {64, 2, Activation::Tanh}}, init);
  const CriticNet critic(DdpgKind::MADDPG, n_agents, obs_dim, 2, init);

  Rng data(seed + 1);
  const std::vector<double> o = random_vec(obs_dim, data);
  std::vector<double> x = random_vec(critic.layout().total_dim, data);
  for (int k = 0; k < obs_dim; ++k) x[static_cast<std::size_t>(k)] = o[static_cast<std::size_t>(k)];
  const std::vector<double> a_others = random_vec((n_agents - 1) * 2, data);

  const auto loss = [&]() { return -critic.forward(x, actor.forward(o), a_others); };

  Gradients grads(actor);
  CriticGrads scratch(critic);
  ForwardCache actor_cache;
  const std::vector<double> a_own = actor.forward(o, &actor_cache);
  CriticCache cache;
  critic.forward(x, a_own, a_others, &cache);
  const CriticNet::BackwardResult back = critic.backward(cache, 1.0, scratch);
  std::vector<double> dl(2);
  for (int k = 0; k < 2; ++k) dl[static_cast<std::size_t>(k)] = -back.da_own[static_cast<std::size_t>(k)];
  actor.backward(actor_cache, dl, grads);

  GradCheckReport report{name, 0.0, 0};
  fd_compare({&actor}, {&grads}, loss, report);
  return report;
}

inline GradCheckReport check_autoencoder(const std::string& name, std::uint64_t seed) {
  Autoencoder ae(147, 32, 96, seed);
  Rng data(seed + 1);
  std::vector<std::vector<double>> batch;
  for (int k = 0; k < 2; ++k) {
    std::vector<double> sample(147, 0.0);
    for (int j = 0; j < 12; ++j) sample[static_cast<std::size_t>(data.uniform_int(147))] = 1.0;
    batch.push_back(std::move(sample));
  }

  const auto loss = [&]() {
    double total = 0.0;
    for (const auto& sample : batch) {
      const std::vector<double> rec = ae.reconstruct(sample);
      for (std::size_t j = 0; j < sample.size(); ++j)
        total += (rec[j] - sample[j]) * (rec[j] - sample[j]);
    }
    return total / (static_cast<double>(batch.size()) * 147.0);
  };

  Gradients genc(ae.encoder()), gdec(ae.decoder());
  const double scale = 1.0 / (static_cast<double>(batch.size()) * 147.0);
  for (const auto& sample : batch) {
    ForwardCache enc_cache, dec_cache;
    const std::vector<double> code = ae.encoder().forward(sample, &enc_cache);
    const std::vector<double> rec = ae.decoder().forward(code, &dec_cache);
    std::vector<double> dl(rec.size());
    for (std::size_t j = 0; j < rec.size(); ++j) dl[j] = 2.0 * (rec[j] - sample[j]) * scale;
    const std::vector<double> dcode = ae.decoder().backward(dec_cache, dl, gdec);
    ae.encoder().backward(enc_cache, dcode, genc);
  }

  GradCheckReport report{name, 0.0, 0};
  fd_compare({&ae.encoder(), &ae.decoder()}, {&genc, &gdec}, loss, report);
  return report;
}

inline RunConfig gradcheck_run_config(EnvFamily family, const std::string& env_name,
                                      AgentMode mode) {
  RunConfig rc;
  rc.family = family;
  rc.env_name = env_name;
  rc.mode = mode;
  rc.p = 0.2;
  return rc;
}

}  // namespace detail

/// Finite-difference verification of every network topology the experiments
/// train: the factored and collapsed Q-networks of both discrete families,
/// the waterworld actor and both critic variants, and the autoencoder.
inline std::vector<GradCheckReport> run_gradcheck() {
  using detail::gradcheck_run_config;
  std::vector<GradCheckReport> reports;
  reports.push_back(detail::check_qnet(
      "pursuit dcc_md f/g/h",
      gradcheck_run_config(EnvFamily::Pursuit, "pursuit", AgentMode::DCC_MD), 147, 4, 11));
  reports.push_back(detail::check_qnet(
      "pursuit fdc f/h", gradcheck_run_config(EnvFamily::Pursuit, "pursuit", AgentMode::FDC),
      147, 4, 12));
  reports.push_back(detail::check_qnet(
      "pursuit concat_md", gradcheck_run_config(EnvFamily::Pursuit, "pursuit", AgentMode::CONCAT_MD),
      147, 4, 13));
  reports.push_back(detail::check_qnet(
      "nav dcc_md f/g/h", gradcheck_run_config(EnvFamily::Nav, "nav", AgentMode::DCC_MD), 18, 4,
      14));
  reports.push_back(detail::check_qnet(
      "nav fdc f/h", gradcheck_run_config(EnvFamily::Nav, "nav", AgentMode::FDC), 18, 4, 15));
  reports.push_back(detail::check_critic("waterworld centralized critic", DdpgKind::MADDPG_MD, 4,
                                         179, 16));
  reports.push_back(detail::check_critic("waterworld independent critic", DdpgKind::DDPG, 4, 179,
                                         17));
  reports.push_back(detail::check_actor("waterworld actor", 18));
  reports.push_back(detail::check_autoencoder("autoencoder 147-96-32", 19));
  return reports;
}

inline bool gradcheck_passed(const std::vector<GradCheckReport>& reports, double tol = 1e-4) {
  for (const GradCheckReport& r : reports) {
    if (!(r.max_rel_err < tol)) return false;
    if (r.params_checked == 0) return false;
    if (r.params_skipped * 50 > r.params_checked) return false;
  }
  return true;
}

}  // namespace dnmd
