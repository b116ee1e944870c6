#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dnmd/rng.hpp"

namespace dnmd {

/// Partition of a flat input vector into the agent's own-observation block
/// followed by one block per other agent's message. Blocks are disjoint,
/// contiguous and cover the whole vector.
struct BlockLayout {
  struct Block {
    int agent_id = -1;
    int offset = 0;
    int length = 0;
  };

  Block own;
  std::vector<Block> messages;
  int total_dim = 0;

  /// Own block first, then message blocks in the given order.
  static BlockLayout make(int own_length, const std::vector<std::pair<int, int>>& message_blocks) {
    if (own_length <= 0) throw std::invalid_argument("layout: own block must be non-empty");
    BlockLayout lay;
    lay.own = {-1, 0, own_length};
    int offset = own_length;
    for (const auto& [agent_id, length] : message_blocks) {
      if (length <= 0) throw std::invalid_argument("layout: message block must be non-empty");
      lay.messages.push_back({agent_id, offset, length});
      offset += length;
    }
    lay.total_dim = offset;
    return lay;
  }

  int num_message_blocks() const { return static_cast<int>(messages.size()); }
  int message_dim() const { return total_dim - own.length; }
};

/// One Bernoulli keep/drop decision per message block; the own block carries
/// its own flag, which only the full-dropout variants ever clear.
struct BlockMask {
  std::uint8_t own = 1;
  std::vector<std::uint8_t> keep;

  bool operator==(const BlockMask&) const = default;
};

/// Per-element binary keep mask over the full input vector.
using ElementMask = std::vector<std::uint8_t>;

namespace detail {

inline void check_p(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("dropout rate outside [0,1]");
}

inline void check_dim(std::span<const double> x, const BlockLayout& lay) {
  if (static_cast<int>(x.size()) != lay.total_dim)
    throw std::invalid_argument("vector length does not match layout");
}

}  // namespace detail

/// Each message block is kept independently with probability 1-p. The own
/// block is always kept unless include_own (the full-dropout ablation).
inline BlockMask sample_block_mask(const BlockLayout& layout, double p, bool include_own,
                                   Rng& rng) {
  detail::check_p(p);
  BlockMask mask;
  mask.own = include_own ? static_cast<std::uint8_t>(!rng.bernoulli(p)) : std::uint8_t{1};
  mask.keep.resize(layout.messages.size());
  for (std::size_t i = 0; i < layout.messages.size(); ++i)
    mask.keep[i] = static_cast<std::uint8_t>(!rng.bernoulli(p));
  return mask;
}

/// Element-wise independent Bernoulli(1-p) keeps over message elements (and
/// own elements iff include_own); the standard-dropout ablation.
inline ElementMask sample_element_mask(const BlockLayout& layout, double p, bool include_own,
                                       Rng& rng) {
  detail::check_p(p);
  ElementMask mask(static_cast<std::size_t>(layout.total_dim), 1);
  if (include_own) {
    for (int i = 0; i < layout.own.length; ++i)
      mask[static_cast<std::size_t>(layout.own.offset + i)] =
          static_cast<std::uint8_t>(!rng.bernoulli(p));
  }
  for (const auto& blk : layout.messages) {
    for (int i = 0; i < blk.length; ++i)
      mask[static_cast<std::size_t>(blk.offset + i)] =
          static_cast<std::uint8_t>(!rng.bernoulli(p));
  }
  return mask;
}

/// Zeroes dropped blocks; kept entries pass through unchanged. No 1/(1-p)
/// inflation at train time; compensation happens at execution via exec_scale.
inline std::vector<double> apply_mask(std::span<const double> x, const BlockLayout& layout,
                                      const BlockMask& mask) {
  detail::check_dim(x, layout);
  if (mask.keep.size() != layout.messages.size())
    throw std::invalid_argument("mask length does not match layout");
  std::vector<double> out(x.begin(), x.end());
  if (!mask.own) {
    for (int i = 0; i < layout.own.length; ++i) out[static_cast<std::size_t>(layout.own.offset + i)] = 0.0;
  }
  for (std::size_t b = 0; b < layout.messages.size(); ++b) {
    if (mask.keep[b]) continue;
    const auto& blk = layout.messages[b];
    for (int i = 0; i < blk.length; ++i) out[static_cast<std::size_t>(blk.offset + i)] = 0.0;
  }
  return out;
}

inline std::vector<double> apply_mask(std::span<const double> x, const BlockLayout& layout,
                                      const ElementMask& mask) {
  detail::check_dim(x, layout);
  if (mask.size() != x.size()) throw std::invalid_argument("mask length does not match layout");
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!mask[i]) out[i] = 0.0;
  return out;
}

/// Execution-time compensation: message entries multiplied by 1-p, own block
/// unchanged (scaled too only for the full-dropout variants). Scaling the
/// input activations is algebraically identical to scaling the first affine
/// layer's outgoing weights.
inline std::vector<double> exec_scale(std::span<const double> x, const BlockLayout& layout,
                                      double p, bool include_own = false) {
  detail::check_p(p);
  detail::check_dim(x, layout);
  std::vector<double> out(x.begin(), x.end());
  const double keep = 1.0 - p;
  if (include_own) {
    for (int i = 0; i < layout.own.length; ++i) out[static_cast<std::size_t>(layout.own.offset + i)] *= keep;
  }
  for (const auto& blk : layout.messages) {
    for (int i = 0; i < blk.length; ++i) out[static_cast<std::size_t>(blk.offset + i)] *= keep;
  }
  return out;
}

}  // namespace dnmd
