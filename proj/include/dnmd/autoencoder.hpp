#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "dnmd/env.hpp"
#include "dnmd/mlp.hpp"
#include "dnmd/rng.hpp"

namespace dnmd {

/// Observation compressor: relu encoder to a low-dimensional code, relu
/// decoder back, trained on plain reconstruction MSE. Used to shrink
/// messages before they enter the communication channel.
class Autoencoder {
 public:
  Autoencoder() = default;

  Autoencoder(int input_dim, int code_dim, int hidden_dim, Rng& rng)
      : encoder_({{input_dim, hidden_dim, Activation::Relu},
                  {hidden_dim, code_dim, Activation::Linear}},
                 rng),
        decoder_({{code_dim, hidden_dim, Activation::Relu},
                  {hidden_dim, input_dim, Activation::Linear}},
                 rng),
        adam_enc_(encoder_),
        adam_dec_(decoder_) {}

  Autoencoder(int input_dim, int code_dim, int hidden_dim, std::uint64_t seed) {
    Rng rng(seed);
    *this = Autoencoder(input_dim, code_dim, hidden_dim, rng);
  }

  int input_dim() const { return encoder_.input_dim(); }
  int code_dim() const { return encoder_.output_dim(); }

  std::vector<double> encode(std::span<const double> x) const { return encoder_.forward(x); }

  std::vector<double> reconstruct(std::span<const double> x) const {
    return decoder_.forward(encoder_.forward(x));
  }

  /// One minibatch step on loss = mean over samples and elements of the
  /// squared reconstruction error. Returns the batch loss.
  double train_step(const std::vector<const std::vector<double>*>& batch, double lr) {
    if (batch.empty()) throw std::invalid_argument("autoencoder: empty batch");
    Gradients genc(encoder_), gdec(decoder_);
    const double scale = 1.0 / (static_cast<double>(batch.size()) * input_dim());
    double loss = 0.0;
    for (const std::vector<double>* x : batch) {
      ForwardCache enc_cache, dec_cache;
      const std::vector<double> code = encoder_.forward(*x, &enc_cache);
      const std::vector<double> out = decoder_.forward(code, &dec_cache);
      std::vector<double> dl(out.size());
      for (std::size_t e = 0; e < out.size(); ++e) {
        const double err = out[e] - (*x)[e];
        loss += err * err;
        dl[e] = 2.0 * err * scale;
      }
      const std::vector<double> dcode = decoder_.backward(dec_cache, dl, gdec);
      encoder_.backward(enc_cache, dcode, genc);
    }
    adam_enc_.step(encoder_, genc, lr);
    adam_dec_.step(decoder_, gdec, lr);
    return loss * scale;
  }

  /// Mean squared reconstruction error per element over a dataset.
  double mse(const std::vector<std::vector<double>>& data) const {
    if (data.empty()) throw std::invalid_argument("autoencoder: empty dataset");
    double loss = 0.0;
    for (const std::vector<double>& x : data) {
      const std::vector<double> out = reconstruct(x);
      for (std::size_t e = 0; e < out.size(); ++e) {
        const double err = out[e] - x[e];
        loss += err * err;
      }
    }
    return loss / (static_cast<double>(data.size()) * input_dim());
  }

  const Mlp& encoder() const { return encoder_; }
  const Mlp& decoder() const { return decoder_; }
  Mlp& encoder() { return encoder_; }
  Mlp& decoder() { return decoder_; }

  void save(std::ostream& os) const {
    save_mlp(os, encoder_);
    save_mlp(os, decoder_);
  }

  static Autoencoder load(std::istream& is) {
    Autoencoder ae;
    ae.encoder_ = load_mlp(is);
    ae.decoder_ = load_mlp(is);
    if (ae.encoder_.output_dim() != ae.decoder_.input_dim() ||
        ae.encoder_.input_dim() != ae.decoder_.output_dim())
      throw std::runtime_error("autoencoder: encoder/decoder dims do not match");
    ae.adam_enc_ = AdamState(ae.encoder_);
    ae.adam_dec_ = AdamState(ae.decoder_);
    return ae;
  }

  bool operator==(const Autoencoder& other) const {
    return encoder_ == other.encoder_ && decoder_ == other.decoder_;
  }

 private:
  Mlp encoder_;
  Mlp decoder_;
  AdamState adam_enc_;
  AdamState adam_dec_;
};

/// MessageEncoder adapter so environments can emit compressed messages.
class AutoencoderCodec final : public MessageEncoder {
 public:
  explicit AutoencoderCodec(const Autoencoder& ae) : ae_(&ae) {}

  std::vector<double> encode(const std::vector<double>& observation) const override {
    return ae_->encode(observation);
  }
  int encoded_dim() const override { return ae_->code_dim(); }

 private:
  const Autoencoder* ae_;
};

}  // namespace dnmd
