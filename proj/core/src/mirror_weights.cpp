#include "fpmd/mirror_weights.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fpmd {

Vector exp_q_weights(const Vector& q, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("exp_q_weights: lambda must be > 0");
  if (q.size() == 0) throw std::invalid_argument("exp_q_weights: empty q");
  if (!q.allFinite()) throw std::invalid_argument("exp_q_weights: non-finite q values");

  double q_max = static_cast<double>(q(0));
  for (Eigen::Index i = 1; i < q.size(); ++i)
    q_max = std::max(q_max, static_cast<double>(q(i)));

  Vector w(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double e = std::exp((static_cast<double>(q(i)) - q_max) / lambda);
    w(i) = static_cast<float>(std::clamp(e, kWeightClipMin, kWeightClipMax));
  }
  return w;
}

}  // namespace fpmd
