#pragma once

#include "fpmd/types.hpp"

namespace fpmd {

inline constexpr int kTimeFreqCount = 4;
inline constexpr int kTimeEmbedDim = 2 * kTimeFreqCount;

/// Sinusoidal features (sin(2 pi f_i t), cos(2 pi f_i t)) with
/// f_i = 2^(i-1) in {0.5, 1, 2, 4}. The lowest frequency is a half period
/// over [0, 1], so t=0 and t=1 embed to distinct vectors; integer
/// frequencies alone are 1-periodic and would alias the two endpoints,
/// which the average-velocity nets query at (r, t) = (0, 1).
template <typename S>
VectorT<S> time_embedding(S t) {
  VectorT<S> e(kTimeEmbedDim);
  S f = S(0.5);
  for (int i = 0; i < kTimeFreqCount; ++i, f *= S(2)) {
    const S w = S(2) * S(M_PI) * f * t;
    e(2 * i) = std::sin(w);
    e(2 * i + 1) = std::cos(w);
  }
  return e;
}

/// d/dt of time_embedding, for chain-ruling input-space tangents.
template <typename S>
VectorT<S> time_embedding_dot(S t) {
  VectorT<S> e(kTimeEmbedDim);
  S f = S(0.5);
  for (int i = 0; i < kTimeFreqCount; ++i, f *= S(2)) {
    const S c = S(2) * S(M_PI) * f;
    e(2 * i) = c * std::cos(c * t);
    e(2 * i + 1) = -c * std::sin(c * t);
  }
  return e;
}

}  // namespace fpmd
