#pragma once

#include "fpmd/types.hpp"

namespace fpmd {

inline constexpr double kWeightClipMin = 1e-4;
inline constexpr double kWeightClipMax = 1e2;

/// Exponential mirror-descent regression weights
///   w_i = clip(exp((q_i - max_j q_j) / lambda), 1e-4, 1e2).
///
/// The batch-max subtraction multiplies the objective by one positive
/// constant per batch, so the minimizer is unchanged while exp can no
/// longer overflow; it also makes the weights exactly invariant to adding
/// a common constant to every q. Computed in double, returned as float.
///
/// Throws on lambda <= 0 or non-finite q entries.
Vector exp_q_weights(const Vector& q, double lambda);

}  // namespace fpmd
