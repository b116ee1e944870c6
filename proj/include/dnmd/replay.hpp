#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <vector>

#include "dnmd/rng.hpp"

namespace dnmd {

/// One agent's experience tuple. Messages are the concatenated received
/// messages; the terminal flag lets TD targets zero the bootstrap term.
struct Transition {
  std::vector<double> o;
  std::vector<double> m;
  int action = 0;
  double r = 0.0;
  std::vector<double> o_next;
  std::vector<double> m_next;
  bool terminal = false;

  bool shape_matches(const Transition& other) const {
    return o.size() == other.o.size() && m.size() == other.m.size() &&
           o_next.size() == other.o_next.size() && m_next.size() == other.m_next.size();
  }
};

/// Fixed-capacity FIFO experience memory with uniform minibatch sampling
/// (with replacement). Single writer, single reader.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay: capacity must be positive");
  }

  void push(T item) {
    if constexpr (requires(const T& a, const T& b) { a.shape_matches(b); }) {
      if (!items_.empty() && !item.shape_matches(items_.front()))
        throw std::invalid_argument("replay: transition shape does not match buffer schema");
    }
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(item));
  }

  /// Uniform with replacement across current contents.
  std::vector<const T*> sample(std::size_t batch_size, Rng& rng) const {
    if (items_.empty()) throw std::runtime_error("replay: sampling from empty buffer");
    std::vector<const T*> batch(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i)
      batch[i] = &items_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(items_.size())))];
    return batch;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const T& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
};

}  // namespace dnmd
