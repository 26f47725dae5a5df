#pragma once

#include <cstdint>
#include <string>

#include "fpmd/types.hpp"

namespace fpmd {

/// Empirical sample cloud, one point per row. Estimators operate in double
/// regardless of where the samples came from.
struct SampleSet {
  Eigen::MatrixXd points;
  std::string label;
};

/// Largest n handled by the exact assignment path; beyond it the estimate
/// falls back to sliced projections.
inline constexpr Eigen::Index kAssignmentCap = 512;
inline constexpr int kSlicedProjections = 128;
inline constexpr std::uint64_t kSlicedSeed = 0x51cedull;

struct W2Result {
  double distance = 0.0;
  bool exact = true;  // false: sliced approximation
};

/// Empirical 2-Wasserstein distance between two equally sized clouds.
///   d = 1            exact, sorted pairing
///   d >= 2, n <= 512 exact, optimal assignment on squared-Euclidean costs
///   d >= 2, n >  512 sliced over 128 fixed-seed projections (approximate)
/// Throws on dimension or size mismatch, or n < 2.
W2Result empirical_w2(const SampleSet& a, const SampleSet& b);

/// Minimum-cost perfect matching value for a dense square cost matrix,
/// O(n^3) shortest augmenting paths with dual potentials.
double assignment_min_cost(const Eigen::MatrixXd& cost);

double w2_sorted_1d(Eigen::VectorXd a, Eigen::VectorXd b);
double w2_sliced(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                 int projections = kSlicedProjections, std::uint64_t seed = kSlicedSeed);

}  // namespace fpmd
