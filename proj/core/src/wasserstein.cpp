#include "fpmd/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fpmd/rng.hpp"

namespace fpmd {

double w2_sorted_1d(Eigen::VectorXd a, Eigen::VectorXd b) {
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  const double mean_sq = (a - b).squaredNorm() / static_cast<double>(a.size());
  return std::sqrt(mean_sq);
}

double assignment_min_cost(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("assignment: cost matrix must be square");
  if (n == 0) return 0.0;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Shortest augmenting path with dual potentials; rows/cols are 1-based,
  // column 0 is the virtual start of each augmentation.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<Eigen::Index> match(static_cast<std::size_t>(n) + 1, 0);  // col -> row
  std::vector<Eigen::Index> way(static_cast<std::size_t>(n) + 1, 0);

  for (Eigen::Index i = 1; i <= n; ++i) {
    match[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> min_v(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Eigen::Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < min_v[static_cast<std::size_t>(j)]) {
          min_v[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (min_v[static_cast<std::size_t>(j)] < delta) {
          delta = min_v[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          min_v[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  double total = 0.0;
  for (Eigen::Index j = 1; j <= n; ++j)
    total += cost(match[static_cast<std::size_t>(j)] - 1, j - 1);
  return total;
}

double w2_sliced(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int projections,
                 std::uint64_t seed) {
  const Eigen::Index d = a.cols();
  Rng rng(seed);
  double sum_sq = 0.0;
  for (int p = 0; p < projections; ++p) {
    Eigen::VectorXd dir(d);
    for (Eigen::Index i = 0; i < d; ++i) dir(i) = rng.normal();
    dir.normalize();
    const double w = w2_sorted_1d(a * dir, b * dir);
    sum_sq += w * w;
  }
  return std::sqrt(sum_sq / projections);
}

W2Result empirical_w2(const SampleSet& a, const SampleSet& b) {
  if (a.points.cols() != b.points.cols())
    throw std::invalid_argument("empirical_w2: dimension mismatch");
  if (a.points.rows() != b.points.rows())
    throw std::invalid_argument("empirical_w2: sample sets must have equal sizes");
  if (a.points.rows() < 2) throw std::invalid_argument("empirical_w2: need n >= 2");
  if (!a.points.allFinite() || !b.points.allFinite())
    throw std::invalid_argument("empirical_w2: non-finite samples");

  const Eigen::Index n = a.points.rows();
  const Eigen::Index d = a.points.cols();
  W2Result out;
  if (d == 1) {
    out.distance = w2_sorted_1d(a.points.col(0), b.points.col(0));
    out.exact = true;
  } else if (n <= kAssignmentCap) {
    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        cost(i, j) = (a.points.row(i) - b.points.row(j)).squaredNorm();
    out.distance = std::sqrt(assignment_min_cost(cost) / static_cast<double>(n));
    out.exact = true;
  } else {
    out.distance = w2_sliced(a.points, b.points);
    out.exact = false;
  }
  return out;
}

}  // namespace fpmd
