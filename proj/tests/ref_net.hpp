// Test-only double-precision MLP reference: scalar loops, no shared code
// with the library's Eigen path. Used as the independent oracle for
// forward values and for finite-difference gradient/JVP checks.
#pragma once

#include <cmath>
#include <vector>

#include "fpmd/net.hpp"

namespace fpmd_test {

struct RefNet {
  std::vector<std::vector<std::vector<double>>> w;  // [layer][out][in]
  std::vector<std::vector<double>> b;               // [layer][out]
  std::vector<fpmd::Activation> act;

  static RefNet from(const fpmd::MlpParams& p) {
    RefNet r;
    for (const auto& layer : p.layers) {
      std::vector<std::vector<double>> lw(static_cast<std::size_t>(layer.weight.rows()));
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
        lw[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(layer.weight.cols()));
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
          lw[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
              static_cast<double>(layer.weight(i, j));
      }
      std::vector<double> lb(static_cast<std::size_t>(layer.bias.size()));
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
        lb[static_cast<std::size_t>(i)] = static_cast<double>(layer.bias(i));
      r.w.push_back(std::move(lw));
      r.b.push_back(std::move(lb));
      r.act.push_back(layer.act);
    }
    return r;
  }

  static double activate(double x, fpmd::Activation a) {
    switch (a) {
      case fpmd::Activation::Tanh: return std::tanh(x);
      case fpmd::Activation::Gelu: return x * 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
      default: return x;
    }
  }

  std::vector<double> forward(std::vector<double> h) const {
    for (std::size_t l = 0; l < w.size(); ++l) {
      std::vector<double> next(w[l].size());
      for (std::size_t i = 0; i < w[l].size(); ++i) {
        double sum = b[l][i];
        for (std::size_t j = 0; j < w[l][i].size(); ++j) sum += w[l][i][j] * h[j];
        next[i] = activate(sum, act[l]);
      }
      h = std::move(next);
    }
    return h;
  }

  // <upstream, forward(x)> summed over batch rows
  double objective(const std::vector<std::vector<double>>& xs,
                   const std::vector<std::vector<double>>& upstreams) const {
    double total = 0.0;
    for (std::size_t r = 0; r < xs.size(); ++r) {
      const auto y = forward(xs[r]);
      for (std::size_t c = 0; c < y.size(); ++c) total += upstreams[r][c] * y[c];
    }
    return total;
  }
};

/// Central finite differences of <upstream, forward> with respect to every
/// parameter; returns a net-shaped structure of doubles.
struct RefGrads {
  std::vector<std::vector<std::vector<double>>> w;
  std::vector<std::vector<double>> b;
};

inline RefGrads fd_param_grads(RefNet net, const std::vector<std::vector<double>>& xs,
                               const std::vector<std::vector<double>>& ups, double h = 1e-4) {
  RefGrads g;
  g.w.resize(net.w.size());
  g.b.resize(net.b.size());
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    g.w[l].assign(net.w[l].size(), {});
    for (std::size_t i = 0; i < net.w[l].size(); ++i) {
      g.w[l][i].resize(net.w[l][i].size());
      for (std::size_t j = 0; j < net.w[l][i].size(); ++j) {
        const double saved = net.w[l][i][j];
        net.w[l][i][j] = saved + h;
        const double hi = net.objective(xs, ups);
        net.w[l][i][j] = saved - h;
        const double lo = net.objective(xs, ups);
        net.w[l][i][j] = saved;
        g.w[l][i][j] = (hi - lo) / (2.0 * h);
      }
    }
    g.b[l].resize(net.b[l].size());
    for (std::size_t i = 0; i < net.b[l].size(); ++i) {
      const double saved = net.b[l][i];
      net.b[l][i] = saved + h;
      const double hi = net.objective(xs, ups);
      net.b[l][i] = saved - h;
      const double lo = net.objective(xs, ups);
      net.b[l][i] = saved;
      g.b[l][i] = (hi - lo) / (2.0 * h);
    }
  }
  return g;
}

/// Central finite differences of forward along a fixed input direction.
inline std::vector<double> fd_directional(const RefNet& net, const std::vector<double>& x,
                                          const std::vector<double>& tangent, double h = 1e-4) {
  std::vector<double> hi = x, lo = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    hi[i] += h * tangent[i];
    lo[i] -= h * tangent[i];
  }
  const auto yh = net.forward(hi);
  const auto yl = net.forward(lo);
  std::vector<double> out(yh.size());
  for (std::size_t i = 0; i < yh.size(); ++i) out[i] = (yh[i] - yl[i]) / (2.0 * h);
  return out;
}

inline std::vector<double> to_std(const fpmd::Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline std::vector<std::vector<double>> rows_of(const fpmd::Batch& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          static_cast<double>(m(i, j));
  }
  return out;
}

}  // namespace fpmd_test
