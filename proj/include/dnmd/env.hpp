#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace dnmd {

/// Joint result of one environment tick. One observation and reward per
/// agent; terminal means the episode must be reset.
struct EnvStep {
  std::vector<std::vector<double>> observations;
  std::vector<double> rewards;
  bool terminal = false;
  int captures = 0;    // evaders or food captured this tick
  int collisions = 0;  // agent-agent collisions this tick
};

/// Observation-to-message compressor hook (see autoencoder module).
class MessageEncoder {
 public:
  virtual ~MessageEncoder() = default;
  virtual std::vector<double> encode(const std::vector<double>& observation) const = 0;
  virtual int encoded_dim() const = 0;
};

/// Common surface of the discrete-action environments (pursuit, cooperative
/// navigation). One instance is single-threaded; instances share nothing.
class DiscreteEnv {
 public:
  virtual ~DiscreteEnv() = default;

  virtual void reset(std::uint64_t seed) = 0;
  virtual EnvStep step(const std::vector<int>& joint_action) = 0;
  virtual std::vector<double> observe(int agent) const = 0;
  virtual int num_agents() const = 0;
  virtual int obs_dim() const = 0;
  virtual int num_actions() const = 0;
  virtual int step_count() const = 0;
  virtual std::pair<double, double> agent_position(int agent) const = 0;

  /// The agent's outgoing message: its observation itself, or the codec's
  /// compression of it. Toggling the codec never touches environment state.
  std::vector<double> message_of(int agent) const {
    std::vector<double> obs = observe(agent);
    return codec_ ? codec_->encode(obs) : obs;
  }

  void set_message_encoder(const MessageEncoder* codec) { codec_ = codec; }
  const MessageEncoder* message_encoder() const { return codec_; }
  int message_dim() const { return codec_ ? codec_->encoded_dim() : obs_dim(); }

 private:
  const MessageEncoder* codec_ = nullptr;
};

}  // namespace dnmd
