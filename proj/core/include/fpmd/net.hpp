#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fpmd/rng.hpp"
#include "fpmd/types.hpp"

namespace fpmd {

enum class Activation { Tanh, Gelu, Identity };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

template <typename S>
struct LayerT {
  MatrixT<S> weight;  // [out x in]
  VectorT<S> bias;    // [out]
  Activation act = Activation::Identity;
};

/// Dense MLP parameters. Layers chain: layer i's input width equals
/// layer i-1's output width.
template <typename S>
struct MlpParamsT {
  std::vector<LayerT<S>> layers;

  Eigen::Index input_dim() const { return layers.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers.back().weight.rows(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }
};

using MlpParams = MlpParamsT<float>;

/// Gradient (or moment) container shaped like the parameters it mirrors.
template <typename S>
struct MlpGradsT {
  std::vector<MatrixT<S>> weight;
  std::vector<VectorT<S>> bias;
};

using MlpGrads = MlpGradsT<float>;

namespace detail {

template <typename S>
S activate(S x, Activation a) {
  switch (a) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::Gelu: {
      const S phi = S(0.5) * (S(1) + std::erf(x * S(M_SQRT1_2)));
      return x * phi;
    }
    default: return x;
  }
}

template <typename S>
S activate_deriv(S x, Activation a) {
  switch (a) {
    case Activation::Tanh: {
      const S t = std::tanh(x);
      return S(1) - t * t;
    }
    case Activation::Gelu: {
      const S phi = S(0.5) * (S(1) + std::erf(x * S(M_SQRT1_2)));
      const S pdf = std::exp(S(-0.5) * x * x) * S(0.3989422804014326779);
      return phi + x * pdf;
    }
    default: return S(1);
  }
}

template <typename S>
void check_input(const MlpParamsT<S>& p, const MatrixT<S>& x, const char* op) {
  if (p.layers.empty()) throw std::invalid_argument(std::string(op) + ": empty network");
  if (x.cols() != p.input_dim())
    throw std::invalid_argument(std::string(op) + ": input has " + std::to_string(x.cols()) +
                                " columns, network expects " + std::to_string(p.input_dim()));
}

// tanh stays on Eigen's vectorized array kernels; gelu needs erf, which has
// no packet op, so it goes through a scalar loop.
template <typename S>
MatrixT<S> apply_activation(const MatrixT<S>& pre, Activation a) {
  switch (a) {
    case Activation::Tanh: return pre.array().tanh().matrix();
    case Activation::Identity: return pre;
    default: return pre.unaryExpr([](S v) { return activate(v, Activation::Gelu); });
  }
}

template <typename S>
MatrixT<S> activation_deriv_from_pre(const MatrixT<S>& pre, Activation a) {
  switch (a) {
    case Activation::Tanh: return (S(1) - pre.array().tanh().square()).matrix();
    case Activation::Identity: return MatrixT<S>::Ones(pre.rows(), pre.cols());
    default: return pre.unaryExpr([](S v) { return activate_deriv(v, Activation::Gelu); });
  }
}

}  // namespace detail

/// Per-layer values cached by a forward pass for reuse in backward.
template <typename S>
struct ForwardTraceT {
  std::vector<MatrixT<S>> inputs;  // input to layer i (inputs[0] == x)
  std::vector<MatrixT<S>> pre;     // pre-activation of layer i
};

namespace detail {

template <typename S>
MatrixT<S> forward_impl(const MlpParamsT<S>& p, const MatrixT<S>& x,
                        ForwardTraceT<S>* trace = nullptr) {
  detail::check_input(p, x, "forward");
  MatrixT<S> h = x;
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  for (const auto& l : p.layers) {
    if (trace) trace->inputs.push_back(h);
    MatrixT<S> pre = (h * l.weight.transpose()).rowwise() + l.bias.transpose();
    h = detail::apply_activation(pre, l.act);
    if (trace) trace->pre.push_back(std::move(pre));
  }
  return h;
}

template <typename S>
MlpGradsT<S> grad_impl(const MlpParamsT<S>& p, const MatrixT<S>& x, const MatrixT<S>& upstream,
                       MatrixT<S>* input_grad = nullptr) {
  detail::check_input(p, x, "grad");
  if (upstream.cols() != p.output_dim() || upstream.rows() != x.rows())
    throw std::invalid_argument("grad: upstream shape does not match forward output");

  ForwardTraceT<S> trace;
  forward_impl(p, x, &trace);

  const std::size_t n = p.layers.size();
  MlpGradsT<S> g;
  g.weight.resize(n);
  g.bias.resize(n);

  MatrixT<S> delta = upstream;
  for (std::size_t i = n; i-- > 0;) {
    const auto& l = p.layers[i];
    delta = delta.cwiseProduct(detail::activation_deriv_from_pre(trace.pre[i], l.act));
    g.weight[i] = delta.transpose() * trace.inputs[i];
    g.bias[i] = delta.colwise().sum().transpose();
    if (i > 0 || input_grad) delta = MatrixT<S>(delta * l.weight);
  }
  if (input_grad) *input_grad = delta;
  return g;
}

template <typename S>
std::pair<MatrixT<S>, MatrixT<S>> jvp_impl(const MlpParamsT<S>& p, const MatrixT<S>& x,
                                           const MatrixT<S>& tangent) {
  detail::check_input(p, x, "jvp");
  if (tangent.rows() != x.rows() || tangent.cols() != x.cols())
    throw std::invalid_argument("jvp: tangent shape does not match input");

  MatrixT<S> h = x;
  MatrixT<S> dh = tangent;
  for (const auto& l : p.layers) {
    MatrixT<S> pre = (h * l.weight.transpose()).rowwise() + l.bias.transpose();
    MatrixT<S> dpre = dh * l.weight.transpose();
    h = detail::apply_activation(pre, l.act);
    dh = dpre.cwiseProduct(detail::activation_deriv_from_pre(pre, l.act));
  }
  return {std::move(h), std::move(dh)};
}

}  // namespace detail

using ForwardTrace = ForwardTraceT<float>;

inline Batch forward(const MlpParams& p, const Batch& x, ForwardTrace* trace = nullptr) {
  return detail::forward_impl(p, x, trace);
}
inline MatrixT<double> forward(const MlpParamsT<double>& p, const MatrixT<double>& x,
                               ForwardTraceT<double>* trace = nullptr) {
  return detail::forward_impl(p, x, trace);
}

/// Reverse mode: gradient of <upstream, forward(p, x)> with respect to the
/// parameters; linear in upstream. Optionally also returns the gradient
/// with respect to the input rows.
inline MlpGrads grad(const MlpParams& p, const Batch& x, const Batch& upstream,
                     Batch* input_grad = nullptr) {
  return detail::grad_impl(p, x, upstream, input_grad);
}
inline MlpGradsT<double> grad(const MlpParamsT<double>& p, const MatrixT<double>& x,
                              const MatrixT<double>& upstream,
                              MatrixT<double>* input_grad = nullptr) {
  return detail::grad_impl(p, x, upstream, input_grad);
}

/// Forward mode: returns (forward(p, x), J_x(forward) * tangent) where the
/// Jacobian is taken with respect to the inputs. One pass, no second-order
/// terms anywhere.
inline std::pair<Batch, Batch> jvp(const MlpParams& p, const Batch& x, const Batch& tangent) {
  return detail::jvp_impl(p, x, tangent);
}
inline std::pair<MatrixT<double>, MatrixT<double>> jvp(const MlpParamsT<double>& p,
                                                       const MatrixT<double>& x,
                                                       const MatrixT<double>& tangent) {
  return detail::jvp_impl(p, x, tangent);
}

/// Identity on values; the result is a constant with respect to any gradient
/// computed afterwards. Loss code routes every regression target through
/// this so the no-backprop contract is explicit at the call site.
inline Batch stop_gradient(const Batch& x) { return x; }
inline MatrixT<double> stop_gradient(const MatrixT<double>& x) { return x; }

template <typename To, typename From>
MlpParamsT<To> cast_params(const MlpParamsT<From>& p) {
  MlpParamsT<To> out;
  out.layers.reserve(p.layers.size());
  for (const auto& l : p.layers)
    out.layers.push_back({l.weight.template cast<To>(), l.bias.template cast<To>(), l.act});
  return out;
}

MlpGrads zeros_like(const MlpParams& p);
bool all_finite(const MlpParams& p);
bool all_finite(const MlpGrads& g);

/// Uniform fan-in init (+-sqrt(1/fan_in)); the final layer is scaled by
/// `output_scale` so a policy net can start as an approximate no-op.
MlpParams make_mlp(Eigen::Index input, const std::vector<Eigen::Index>& hidden,
                   Eigen::Index output, Activation hidden_act, std::uint64_t seed,
                   float output_scale = 1.0f);

/// Throws if layer dimensions do not chain or any entry is non-finite.
void validate(const MlpParams& p);

}  // namespace fpmd
