#include "fpmd/net.hpp"

#include <cmath>

namespace fpmd {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Gelu: return "gelu";
    default: return "identity";
  }
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "gelu") return Activation::Gelu;
  if (s == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation tag: " + s);
}

MlpGrads zeros_like(const MlpParams& p) {
  MlpGrads g;
  g.weight.reserve(p.layers.size());
  g.bias.reserve(p.layers.size());
  for (const auto& l : p.layers) {
    g.weight.emplace_back(MatrixT<float>::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.emplace_back(VectorT<float>::Zero(l.bias.size()));
  }
  return g;
}

bool all_finite(const MlpParams& p) {
  for (const auto& l : p.layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

bool all_finite(const MlpGrads& g) {
  for (const auto& w : g.weight)
    if (!w.allFinite()) return false;
  for (const auto& b : g.bias)
    if (!b.allFinite()) return false;
  return true;
}

MlpParams make_mlp(Eigen::Index input, const std::vector<Eigen::Index>& hidden,
                   Eigen::Index output, Activation hidden_act, std::uint64_t seed,
                   float output_scale) {
  if (input < 1 || output < 1) throw std::invalid_argument("make_mlp: bad dimensions");
  std::vector<Eigen::Index> widths;
  widths.push_back(input);
  for (auto h : hidden) widths.push_back(h);
  widths.push_back(output);

  Rng rng(seed);
  MlpParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const Eigen::Index fan_in = widths[i];
    const Eigen::Index fan_out = widths[i + 1];
    const bool last = (i + 2 == widths.size());
    const float bound = std::sqrt(1.0f / static_cast<float>(fan_in));
    const float scale = last ? output_scale : 1.0f;

    LayerT<float> l;
    l.weight.resize(fan_out, fan_in);
    l.bias.resize(fan_out);
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c)
        l.weight(r, c) = scale * rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < fan_out; ++r) l.bias(r) = scale * rng.uniform(-bound, bound);
    l.act = last ? Activation::Identity : hidden_act;
    p.layers.push_back(std::move(l));
  }
  return p;
}

void validate(const MlpParams& p) {
  if (p.layers.empty()) throw std::invalid_argument("MlpParams: no layers");
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    if (l.weight.rows() != l.bias.size())
      throw std::invalid_argument("MlpParams: bias size mismatch at layer " + std::to_string(i));
    if (i > 0 && l.weight.cols() != p.layers[i - 1].weight.rows())
      throw std::invalid_argument("MlpParams: layer dimensions do not chain at layer " +
                                  std::to_string(i));
  }
  if (!all_finite(p)) throw std::invalid_argument("MlpParams: non-finite entries");
}

}  // namespace fpmd
