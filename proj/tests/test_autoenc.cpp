#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "dnmd/autoencoder.hpp"
#include "dnmd/rng.hpp"

namespace {

using dnmd::Autoencoder;
using dnmd::AutoencoderCodec;
using dnmd::Rng;

std::vector<std::vector<double>> sparse_binary_data(int n, int dim, int ones, Rng& rng) {
  std::vector<std::vector<double>> data(static_cast<std::size_t>(n),
                                        std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  for (auto& x : data)
    for (int k = 0; k < ones; ++k) x[static_cast<std::size_t>(rng.uniform_int(dim))] = 1.0;
  return data;
}

std::vector<const std::vector<double>*> as_batch(const std::vector<std::vector<double>>& data,
                                                 std::size_t begin, std::size_t count) {
  std::vector<const std::vector<double>*> batch;
  for (std::size_t i = 0; i < count; ++i) batch.push_back(&data[begin + i]);
  return batch;
}

TEST(AutoencoderTest, DimensionsAndDeterminism) {
  Autoencoder a(147, 32, 96, std::uint64_t{7});
  Autoencoder b(147, 32, 96, std::uint64_t{7});
  Autoencoder c(147, 32, 96, std::uint64_t{8});
  EXPECT_EQ(a.input_dim(), 147);
  EXPECT_EQ(a.code_dim(), 32);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);

  std::vector<double> x(147, 0.0);
  x[3] = x[50] = x[146] = 1.0;
  const std::vector<double> code = a.encode(x);
  EXPECT_EQ(code.size(), 32u);
  EXPECT_EQ(code, b.encode(x));
  EXPECT_EQ(a.reconstruct(x).size(), 147u);
}

TEST(AutoencoderTest, LearnsAConstantPointExactly) {
  Rng rng(11);
  Autoencoder ae(8, 4, 6, rng);
  std::vector<std::vector<double>> data{{1.0, 0.0, 0.5, -0.25, 0.0, 1.0, 0.75, -1.0}};
  const std::vector<const std::vector<double>*> batch{&data[0]};

  const double first = ae.train_step(batch, 1e-2);
  double last = first;
  for (int i = 0; i < 3000; ++i) last = ae.train_step(batch, 1e-2);
  EXPECT_LT(last, 1e-6);
  EXPECT_LT(last, first);
  const std::vector<double> rec = ae.reconstruct(data[0]);
  for (std::size_t e = 0; e < rec.size(); ++e) EXPECT_NEAR(rec[e], data[0][e], 1e-2);
}

TEST(AutoencoderTest, EpochLossDecreasesOnStructuredData) {
  Rng data_rng(21);
  const auto data = sparse_binary_data(256, 20, 3, data_rng);
  Rng rng(22);
  Autoencoder ae(20, 8, 16, rng);

  const auto epoch = [&]() {
    double total = 0.0;
    for (std::size_t b = 0; b + 32 <= data.size(); b += 32)
      total += ae.train_step(as_batch(data, b, 32), 1e-3);
    return total / (data.size() / 32);
  };

  const double first = epoch();
  double prev = first;
  double final = first;
  for (int e = 1; e < 40; ++e) {
    final = epoch();
    // Allow tiny non-monotone wiggles but require steady progress.
    EXPECT_LT(final, prev * 1.10) << "epoch " << e;
    prev = final;
  }
  EXPECT_LT(final, 0.5 * first);
}

TEST(AutoencoderTest, TrainedBeatsUntrainedOnHeldOut) {
  Rng data_rng(31);
  const auto train = sparse_binary_data(512, 20, 3, data_rng);
  const auto held_out = sparse_binary_data(128, 20, 3, data_rng);

  Rng rng(32);
  Autoencoder ae(20, 8, 16, rng);
  const double untrained = ae.mse(held_out);
  Rng shuffle_rng(33);
  for (int e = 0; e < 60; ++e)
    for (std::size_t b = 0; b + 32 <= train.size(); b += 32)
      ae.train_step(as_batch(train, b, 32), 1e-3);
  const double trained = ae.mse(held_out);
  EXPECT_GT(untrained, 2.0 * trained);
}

// The composed encoder->decoder backward pass must agree with central finite
// differences of the batch loss with respect to every parameter.
TEST(AutoencoderTest, CompositeGradientMatchesFiniteDifferences) {
  Rng rng(41);
  std::vector<std::vector<double>> data;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    data.push_back(std::move(x));
  }
  const auto batch = as_batch(data, 0, data.size());

  const auto loss_of = [&](const Autoencoder& ae) {
    double total = 0.0;
    for (const auto* x : batch) {
      const std::vector<double> out = ae.reconstruct(*x);
      for (std::size_t e = 0; e < out.size(); ++e) {
        const double err = out[e] - (*x)[e];
        total += err * err;
      }
    }
    return total / (static_cast<double>(batch.size()) * 5.0);
  };

  Autoencoder ae(5, 2, 3, rng);
  const double h = 1e-6;
  // Analytic gradients, accumulated exactly as train_step does.
  dnmd::Gradients genc(ae.encoder()), gdec(ae.decoder());
  const double scale = 1.0 / (static_cast<double>(batch.size()) * 5.0);
  for (const auto* x : batch) {
    dnmd::ForwardCache ec, dc;
    const std::vector<double> code = ae.encoder().forward(*x, &ec);
    const std::vector<double> out = ae.decoder().forward(code, &dc);
    std::vector<double> dl(out.size());
    for (std::size_t e = 0; e < out.size(); ++e) dl[e] = 2.0 * (out[e] - (*x)[e]) * scale;
    const std::vector<double> dcode = ae.decoder().backward(dc, dl, gdec);
    ae.encoder().backward(ec, dcode, genc);
  }

  Autoencoder probe = ae;
  double max_rel = 0.0;
  const auto check_net = [&](dnmd::Mlp& net, const dnmd::Gradients& g) {
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      auto& L = net.layers()[l];
      for (std::size_t k = 0; k < L.w.size() + L.b.size(); ++k) {
        double& param = k < L.w.size() ? L.w[k] : L.b[k - L.w.size()];
        const double saved = param;
        param = saved + h;
        const double up = loss_of(probe);
        param = saved - h;
        const double down = loss_of(probe);
        param = saved;
        const double fd = (up - down) / (2.0 * h);
        const double analytic = k < L.w.size() ? g.w[l][k] : g.b[l][k - L.w.size()];
        const double rel = std::fabs(analytic - fd) /
                           std::max({std::fabs(analytic), std::fabs(fd), 1e-6});
        max_rel = std::max(max_rel, rel);
      }
    }
  };
  check_net(probe.encoder(), genc);
  check_net(probe.decoder(), gdec);
  EXPECT_LT(max_rel, 1e-4);
}

TEST(AutoencoderTest, SaveLoadRoundTripsBitExactly) {
  Rng rng(51);
  Autoencoder ae(12, 4, 8, rng);
  // Push it off the init point so the state is not special.
  std::vector<std::vector<double>> data = sparse_binary_data(32, 12, 2, rng);
  for (int i = 0; i < 10; ++i) ae.train_step(as_batch(data, 0, 32), 1e-3);

  std::stringstream buf;
  ae.save(buf);
  const Autoencoder back = Autoencoder::load(buf);
  EXPECT_TRUE(ae == back);

  std::vector<double> x(12, 0.25);
  EXPECT_EQ(ae.reconstruct(x), back.reconstruct(x));

  std::stringstream bad("nonsense");
  EXPECT_THROW(Autoencoder::load(bad), std::runtime_error);
}

TEST(AutoencoderTest, CodecAdaptsEncode) {
  Autoencoder ae(10, 3, 6, std::uint64_t{61});
  AutoencoderCodec codec(ae);
  EXPECT_EQ(codec.encoded_dim(), 3);
  const std::vector<double> x(10, 0.5);
  EXPECT_EQ(codec.encode(x), ae.encode(x));
}

TEST(AutoencoderTest, RejectsBadInput) {
  Autoencoder ae(6, 2, 4, std::uint64_t{71});
  EXPECT_THROW(ae.train_step({}, 1e-3), std::invalid_argument);
  EXPECT_THROW(ae.mse({}), std::invalid_argument);
  const std::vector<double> wrong(5, 0.0);
  EXPECT_THROW(ae.encode(wrong), std::invalid_argument);
}

}  // namespace
