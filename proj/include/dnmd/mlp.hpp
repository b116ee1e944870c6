#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dnmd/rng.hpp"

namespace dnmd {

enum class Activation : std::uint8_t { Relu = 0, Linear = 1, Tanh = 2 };

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::Relu;
};

namespace detail {

/// Dot product with eight independent accumulators. Fixed summation order,
/// so results are reproducible run to run.
inline double dot(const double* a, const double* b, int n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  int k = 0;
  for (; k + 8 <= n; k += 8) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
    s4 += a[k + 4] * b[k + 4];
    s5 += a[k + 5] * b[k + 5];
    s6 += a[k + 6] * b[k + 6];
    s7 += a[k + 7] * b[k + 7];
  }
  double s = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite ") + what);
  }
}

}  // namespace detail

/// One dense layer: y = act(W x + b), W row-major out x in.
struct Layer {
  int in = 0;
  int out = 0;
  Activation act = Activation::Linear;
  std::vector<double> w;
  std::vector<double> b;

  bool operator==(const Layer&) const = default;
};

/// Per-layer pre-activations and activations from a forward pass; post[0] is
/// the input, post[l + 1] the output of layer l.
struct ForwardCache {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

class Mlp;

/// Parameter-shaped gradient accumulator.
struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  Gradients() = default;
  explicit Gradients(const Mlp& net);

  void zero() {
    for (auto& v : w) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
  }
  void scale(double c) {
    for (auto& v : w)
      for (double& x : v) x *= c;
    for (auto& v : b)
      for (double& x : v) x *= c;
  }
};

/// Dense multi-layer perceptron, double precision throughout.
class Mlp {
 public:
  Mlp() = default;

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  /// Deterministic given the rng state.
  Mlp(const std::vector<LayerSpec>& specs, Rng& rng) {
    if (specs.empty()) throw std::invalid_argument("empty layer spec list");
    layers_.reserve(specs.size());
    for (std::size_t l = 0; l < specs.size(); ++l) {
      const LayerSpec& s = specs[l];
      if (s.in <= 0 || s.out <= 0) throw std::invalid_argument("layer dims must be positive");
      if (l > 0 && s.in != specs[l - 1].out)
        throw std::invalid_argument("layer dims do not chain");
      Layer L;
      L.in = s.in;
      L.out = s.out;
      L.act = s.act;
      L.w.resize(static_cast<std::size_t>(s.in) * s.out);
      L.b.assign(static_cast<std::size_t>(s.out), 0.0);
      const double limit = std::sqrt(6.0 / (s.in + s.out));
      for (double& x : L.w) x = rng.uniform(-limit, limit);
      layers_.push_back(std::move(L));
    }
  }

  Mlp(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    Rng rng(seed);
    *this = Mlp(specs, rng);
  }

  int input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  int output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t num_layers() const { return layers_.size(); }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const Layer& L : layers_) n += L.w.size() + L.b.size();
    return n;
  }

  std::vector<double> forward(std::span<const double> x, ForwardCache* cache = nullptr) const {
    if (static_cast<int>(x.size()) != input_dim())
      throw std::invalid_argument("forward: input dimension mismatch");
    detail::check_finite(x, "input");
    if (cache) {
      cache->pre.assign(layers_.size(), {});
      cache->post.assign(layers_.size() + 1, {});
      cache->post[0].assign(x.begin(), x.end());
    }
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& L = layers_[l];
      next.resize(static_cast<std::size_t>(L.out));
      for (int j = 0; j < L.out; ++j)
        next[static_cast<std::size_t>(j)] =
            L.b[static_cast<std::size_t>(j)] +
            detail::dot(&L.w[static_cast<std::size_t>(j) * L.in], cur.data(), L.in);
      if (cache) cache->pre[l] = next;
      apply_activation(L.act, next);
      if (cache) cache->post[l + 1] = next;
      cur.swap(next);
    }
    return cur;
  }

  /// Accumulates exact gradients of the scalar loss whose output-gradient is
  /// dl_dout into grads (+=) and returns dLoss/dInput.
  std::vector<double> backward(const ForwardCache& cache, std::span<const double> dl_dout,
                               Gradients& grads) const {
    if (cache.pre.size() != layers_.size() || cache.post.size() != layers_.size() + 1 ||
        static_cast<int>(cache.post[0].size()) != input_dim())
      throw std::invalid_argument("backward: cache does not match network");
    if (static_cast<int>(dl_dout.size()) != output_dim())
      throw std::invalid_argument("backward: output gradient dimension mismatch");
    if (grads.w.size() != layers_.size())
      throw std::invalid_argument("backward: gradient shape mismatch");

    std::vector<double> delta(dl_dout.begin(), dl_dout.end());
    std::vector<double> dz;
    std::vector<double> prev;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const Layer& L = layers_[li];
      if (static_cast<int>(cache.pre[li].size()) != L.out)
        throw std::invalid_argument("backward: stale cache");
      dz.resize(static_cast<std::size_t>(L.out));
      for (int j = 0; j < L.out; ++j) {
        const std::size_t ju = static_cast<std::size_t>(j);
        dz[ju] = delta[ju] * activation_grad(L.act, cache.pre[li][ju], cache.post[li + 1][ju]);
      }
      const std::vector<double>& x = cache.post[li];
      std::vector<double>& gw = grads.w[li];
      std::vector<double>& gb = grads.b[li];
      for (int j = 0; j < L.out; ++j) {
        const double d = dz[static_cast<std::size_t>(j)];
        gb[static_cast<std::size_t>(j)] += d;
        double* grow = &gw[static_cast<std::size_t>(j) * L.in];
        for (int k = 0; k < L.in; ++k) grow[k] += d * x[static_cast<std::size_t>(k)];
      }
      prev.assign(static_cast<std::size_t>(L.in), 0.0);
      for (int j = 0; j < L.out; ++j) {
        const double d = dz[static_cast<std::size_t>(j)];
        const double* wrow = &L.w[static_cast<std::size_t>(j) * L.in];
        for (int k = 0; k < L.in; ++k) prev[static_cast<std::size_t>(k)] += d * wrow[k];
      }
      delta.swap(prev);
    }
    return delta;
  }

  bool operator==(const Mlp&) const = default;

 private:
  static void apply_activation(Activation act, std::vector<double>& v) {
    switch (act) {
      case Activation::Relu:
        for (double& x : v) x = x > 0.0 ? x : 0.0;
        break;
      case Activation::Linear:
        break;
      case Activation::Tanh:
        for (double& x : v) x = std::tanh(x);
        break;
    }
  }

  static double activation_grad(Activation act, double pre, double post) {
    switch (act) {
      case Activation::Relu:
        return pre > 0.0 ? 1.0 : 0.0;
      case Activation::Linear:
        return 1.0;
      case Activation::Tanh:
        return 1.0 - post * post;
    }
    return 0.0;
  }

  std::vector<Layer> layers_;
};

inline Gradients::Gradients(const Mlp& net) {
  w.reserve(net.num_layers());
  b.reserve(net.num_layers());
  for (const Layer& L : net.layers()) {
    w.emplace_back(L.w.size(), 0.0);
    b.emplace_back(L.b.size(), 0.0);
  }
}

/// Adam optimizer state for one Mlp. Moments are congruent with the network
/// parameters; t counts completed steps.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const Mlp& net, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Layer& L : net.layers()) {
      mw_.emplace_back(L.w.size(), 0.0);
      vw_.emplace_back(L.w.size(), 0.0);
      mb_.emplace_back(L.b.size(), 0.0);
      vb_.emplace_back(L.b.size(), 0.0);
    }
  }

  std::int64_t t() const { return t_; }

  /// Standard Adam update with bias correction.
  void step(Mlp& net, const Gradients& g, double lr) {
    if (g.w.size() != net.num_layers() || mw_.size() != net.num_layers())
      throw std::invalid_argument("adam: shape mismatch");
    ++t_;
    b1t_ *= beta1_;
    b2t_ *= beta2_;
    const double c1 = 1.0 / (1.0 - b1t_);
    const double c2 = 1.0 / (1.0 - b2t_);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      Layer& L = net.layers()[l];
      update(L.w, g.w[l], mw_[l], vw_[l], lr, c1, c2);
      update(L.b, g.b[l], mb_[l], vb_[l], lr, c1, c2);
    }
  }

  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }

 private:
  void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
              std::vector<double>& v, double lr, double c1, double c2) {
    if (g.size() != p.size()) throw std::invalid_argument("adam: gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi)) throw std::invalid_argument("adam: non-finite gradient");
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      p[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps_);
    }
  }

  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  double b1t_ = 1.0;
  double b2t_ = 1.0;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> mw_, vw_, mb_, vb_;
};

/// Compares analytic gradients against central finite differences of the
/// linear functional dl_dout . output. Checks every parameter when
/// max_checked == 0, otherwise a deterministic strided subset. Returns the
/// worst relative error.
inline double grad_check(const Mlp& net, std::span<const double> x,
                         std::span<const double> dl_dout, std::size_t max_checked = 0,
                         double delta = 1e-5) {
  ForwardCache cache;
  net.forward(x, &cache);
  Gradients analytic(net);
  net.backward(cache, dl_dout, analytic);

  Mlp probe = net;
  const auto loss = [&](void) {
    const std::vector<double> out = probe.forward(x);
    return detail::dot(out.data(), dl_dout.data(), static_cast<int>(out.size()));
  };

  double worst = 0.0;
  const auto check_param = [&](double& p, double a) {
    const double saved = p;
    p = saved + delta;
    const double lp = loss();
    p = saved - delta;
    const double lm = loss();
    p = saved;
    const double fd = (lp - lm) / (2.0 * delta);
    const double denom = std::max({std::fabs(a), std::fabs(fd), 1e-6});
    worst = std::max(worst, std::fabs(a - fd) / denom);
  };

  const std::size_t total = net.param_count();
  const std::size_t stride =
      (max_checked == 0 || total <= max_checked) ? 1 : (total + max_checked - 1) / max_checked;
  std::size_t idx = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Layer& L = probe.layers()[l];
    for (std::size_t i = 0; i < L.w.size(); ++i, ++idx)
      if (idx % stride == 0) check_param(L.w[i], analytic.w[l][i]);
    for (std::size_t i = 0; i < L.b.size(); ++i, ++idx)
      if (idx % stride == 0) check_param(L.b[i], analytic.b[l][i]);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoint format: little-endian, magic "DNMD", u32 version, u32 layer
// count; per layer u32 in, u32 out, u8 activation, row-major f64 weights,
// f64 biases. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "checkpoint code assumes a little-endian host");

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
inline void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated stream");
}
inline void write_u32(std::ostream& os, std::uint32_t v) { write_bytes(os, &v, 4); }
inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  read_bytes(is, &v, 4);
  return v;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'D', 'N', 'M', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_mlp(std::ostream& os, const Mlp& net) {
  detail::write_bytes(os, kCheckpointMagic, 4);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(net.num_layers()));
  for (const Layer& L : net.layers()) {
    detail::write_u32(os, static_cast<std::uint32_t>(L.in));
    detail::write_u32(os, static_cast<std::uint32_t>(L.out));
    const std::uint8_t act = static_cast<std::uint8_t>(L.act);
    detail::write_bytes(os, &act, 1);
    detail::write_bytes(os, L.w.data(), L.w.size() * sizeof(double));
    detail::write_bytes(os, L.b.data(), L.b.size() * sizeof(double));
  }
}

inline Mlp load_mlp(std::istream& is) {
  char magic[4];
  detail::read_bytes(is, magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  if (detail::read_u32(is) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  const std::uint32_t count = detail::read_u32(is);
  Mlp net;
  for (std::uint32_t l = 0; l < count; ++l) {
    Layer L;
    L.in = static_cast<int>(detail::read_u32(is));
    L.out = static_cast<int>(detail::read_u32(is));
    std::uint8_t act = 0;
    detail::read_bytes(is, &act, 1);
    if (act > 2) throw std::runtime_error("checkpoint: bad activation code");
    L.act = static_cast<Activation>(act);
    if (L.in <= 0 || L.out <= 0) throw std::runtime_error("checkpoint: bad layer dims");
    L.w.resize(static_cast<std::size_t>(L.in) * L.out);
    L.b.resize(static_cast<std::size_t>(L.out));
    detail::read_bytes(is, L.w.data(), L.w.size() * sizeof(double));
    detail::read_bytes(is, L.b.data(), L.b.size() * sizeof(double));
    net.layers().push_back(std::move(L));
  }
  return net;
}

inline void save_mlp_file(const std::string& path, const Mlp& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  save_mlp(os, net);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline Mlp load_mlp_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  return load_mlp(is);
}

}  // namespace dnmd
