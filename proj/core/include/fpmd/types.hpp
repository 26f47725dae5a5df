#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace fpmd {

template <typename S>
using MatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VectorT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// A batch is a matrix of row vectors, one sample per row.
using Batch = MatrixT<float>;
using Vector = VectorT<float>;

/// Episode-end semantics. Truncated transitions bootstrap the critic
/// target, terminated ones do not.
enum class DoneFlag { None, Terminated, Truncated };

/// One environment interaction record.
struct Transition {
  Vector s;
  Vector a;
  float r = 0.0f;
  Vector s_next;
  DoneFlag done = DoneFlag::None;
};

/// Column-stacked view of a sampled minibatch of transitions.
struct TransitionBatch {
  Batch s;
  Batch a;
  Vector r;
  Batch s_next;
  std::vector<DoneFlag> done;

  Eigen::Index size() const { return s.rows(); }
};

inline Vector clip_to_bounds(Vector a, const std::vector<std::pair<float, float>>& bounds) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const auto& [lo, hi] = bounds[static_cast<std::size_t>(i)];
    a(i) = a(i) < lo ? lo : (a(i) > hi ? hi : a(i));
  }
  return a;
}

inline const char* to_string(DoneFlag d) {
  switch (d) {
    case DoneFlag::Terminated: return "terminated";
    case DoneFlag::Truncated: return "truncated";
    default: return "none";
  }
}

}  // namespace fpmd
