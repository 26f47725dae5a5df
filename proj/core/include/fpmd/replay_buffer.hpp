#pragma once

#include <cstddef>

#include "fpmd/rng.hpp"
#include "fpmd/types.hpp"

namespace fpmd {

/// Fixed-capacity ring buffer over transitions; oldest entries are
/// overwritten first. Sampling is uniform with replacement over the
/// currently filled slots.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const;

  TransitionBatch sample(std::size_t n, Rng& rng) const;

 private:
  std::vector<Transition> slots_;
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
};

}  // namespace fpmd
