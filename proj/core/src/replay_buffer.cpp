#include "fpmd/replay_buffer.hpp"

#include <stdexcept>

namespace fpmd {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
  slots_.resize(capacity);
}

void ReplayBuffer::push(Transition t) {
  slots_[next_] = std::move(t);
  next_ = (next_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at");
  return slots_[i];
}

TransitionBatch ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw std::runtime_error("ReplayBuffer::sample: buffer is empty");
  if (n == 0) throw std::invalid_argument("ReplayBuffer::sample: n must be >= 1");

  const auto state_dim = slots_[0].s.size();
  const auto action_dim = slots_[0].a.size();
  TransitionBatch b;
  b.s.resize(static_cast<Eigen::Index>(n), state_dim);
  b.a.resize(static_cast<Eigen::Index>(n), action_dim);
  b.r.resize(static_cast<Eigen::Index>(n));
  b.s_next.resize(static_cast<Eigen::Index>(n), state_dim);
  b.done.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = slots_[rng.index(size_)];
    const auto row = static_cast<Eigen::Index>(i);
    b.s.row(row) = t.s.transpose();
    b.a.row(row) = t.a.transpose();
    b.r(row) = t.r;
    b.s_next.row(row) = t.s_next.transpose();
    b.done[i] = t.done;
  }
  return b;
}

}  // namespace fpmd
