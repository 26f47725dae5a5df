#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fpmd/adam.hpp"
#include "fpmd/checkpoint.hpp"
#include "fpmd/net.hpp"
#include "ref_net.hpp"

using namespace fpmd;
using namespace fpmd_test;

namespace {

MlpParams single_layer(const Batch& w, const Vector& b, Activation act) {
  MlpParams p;
  p.layers.push_back({w, b, act});
  return p;
}

// |a - b| <= rtol * max(|b|, floor), floor scaled to the gradient magnitude
void check_close_rel(const std::vector<double>& ours, const std::vector<double>& ref,
                     double rtol) {
  REQUIRE(ours.size() == ref.size());
  double max_abs = 0.0;
  for (double r : ref) max_abs = std::max(max_abs, std::abs(r));
  const double floor = std::max(1e-6, 0.01 * max_abs);
  for (std::size_t i = 0; i < ours.size(); ++i) {
    const double tol = rtol * std::max(std::abs(ref[i]), floor);
    CHECK(std::abs(ours[i] - ref[i]) <= tol);
  }
}

std::vector<double> flatten(const MlpGrads& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    for (Eigen::Index i = 0; i < g.weight[l].rows(); ++i)
      for (Eigen::Index j = 0; j < g.weight[l].cols(); ++j)
        out.push_back(static_cast<double>(g.weight[l](i, j)));
    for (Eigen::Index i = 0; i < g.bias[l].size(); ++i)
      out.push_back(static_cast<double>(g.bias[l](i)));
  }
  return out;
}

std::vector<double> flatten(const RefGrads& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    for (const auto& row : g.w[l])
      for (double v : row) out.push_back(v);
    for (double v : g.b[l]) out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_SUITE("tensor-core") {

TEST_CASE("forward: identity layer is the identity map") {
  MlpParams p = single_layer(Batch::Identity(2, 2), Vector::Zero(2), Activation::Identity);
  Batch x(1, 2);
  x << 1.0f, 2.0f;
  const Batch y = forward(p, x);
  CHECK(y(0, 0) == doctest::Approx(1.0));
  CHECK(y(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("forward: hand linear algebra") {
  Batch w(2, 2);
  w << 2, 0, 0, 3;
  Vector b(2);
  b << 1, 1;
  MlpParams p = single_layer(w, b, Activation::Identity);
  Batch x(1, 2);
  x << 1, 1;
  const Batch y = forward(p, x);
  CHECK(y(0, 0) == doctest::Approx(3.0));
  CHECK(y(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("forward: two-layer tanh net at x=0 matches the scalar reference") {
  const MlpParams p = make_mlp(3, {8, 8}, 2, Activation::Tanh, 42);
  const RefNet ref = RefNet::from(p);
  const Batch x = Batch::Zero(1, 3);
  const Batch y = forward(p, x);
  const auto yr = ref.forward({0.0, 0.0, 0.0});
  CHECK(std::abs(y(0, 0) - yr[0]) <= 1e-6);
  CHECK(std::abs(y(0, 1) - yr[1]) <= 1e-6);
}

TEST_CASE("forward: batch shape and determinism") {
  const MlpParams p = make_mlp(4, {16}, 3, Activation::Tanh, 7);
  Batch x = Batch::Random(5, 4);
  const Batch y1 = forward(p, x);
  const Batch y2 = forward(p, x);
  CHECK(y1.rows() == 5);
  CHECK(y1.cols() == 3);
  CHECK((y1 - y2).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("forward: dimension mismatch is rejected") {
  const MlpParams p = make_mlp(4, {8}, 2, Activation::Tanh, 1);
  CHECK_THROWS_AS(forward(p, Batch::Zero(1, 3)), std::invalid_argument);
}

TEST_CASE("grad: linear layer closed form") {
  Batch w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  Vector b(2);
  b << 0.5f, -0.5f;
  MlpParams p = single_layer(w, b, Activation::Identity);
  Batch x(4, 3), g(4, 2);
  x.setRandom();
  g.setRandom();
  const MlpGrads grads = grad(p, x, g);
  const Batch expect_w = g.transpose() * x;
  const Vector expect_b = g.colwise().sum().transpose();
  CHECK((grads.weight[0] - expect_w).cwiseAbs().maxCoeff() <= 1e-6f);
  CHECK((grads.bias[0] - expect_b).cwiseAbs().maxCoeff() <= 1e-6f);
}

TEST_CASE("grad: zero upstream gives zero gradient") {
  const MlpParams p = make_mlp(3, {8, 8}, 2, Activation::Tanh, 3);
  Batch x = Batch::Random(4, 3);
  const MlpGrads g = grad(p, x, Batch::Zero(4, 2));
  for (const auto& wg : g.weight) CHECK(wg.cwiseAbs().maxCoeff() == 0.0f);
  for (const auto& bg : g.bias) CHECK(bg.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("grad: finite differences on random two-hidden-layer nets") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    const MlpParams p = make_mlp(3, {10, 10}, 2, Activation::Tanh, seed);
    Rng rng(seed + 100);
    Batch x(3, 3), up(3, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = rng.normal();

    const MlpGrads ours = grad(p, x, up);
    const RefGrads ref = fd_param_grads(RefNet::from(p), rows_of(x), rows_of(up));
    check_close_rel(flatten(ours), flatten(ref), 1e-4);
  }
}

TEST_CASE("grad: upstream shape mismatch is rejected") {
  const MlpParams p = make_mlp(3, {8}, 2, Activation::Tanh, 5);
  CHECK_THROWS_AS(grad(p, Batch::Zero(2, 3), Batch::Zero(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(grad(p, Batch::Zero(2, 3), Batch::Zero(3, 2)), std::invalid_argument);
}

TEST_CASE("jvp: affine map directional is A*v independent of x") {
  Batch a(2, 3);
  a << 1, -2, 0.5f, 3, 1, -1;
  Vector b(2);
  b << 7, -7;
  MlpParams p = single_layer(a, b, Activation::Identity);
  Batch x1 = Batch::Random(1, 3), x2 = Batch::Random(1, 3);
  Batch v(1, 3);
  v << 0.3f, -0.6f, 0.9f;
  const auto [y1, d1] = jvp(p, x1, v);
  const auto [y2, d2] = jvp(p, x2, v);
  const Batch expect = v * a.transpose();
  CHECK((d1 - expect).cwiseAbs().maxCoeff() <= 1e-6f);
  CHECK((d2 - expect).cwiseAbs().maxCoeff() <= 1e-6f);
  CHECK((y1 - forward(p, x1)).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("jvp: zero tangent gives zero directional") {
  const MlpParams p = make_mlp(4, {8, 8}, 2, Activation::Tanh, 9);
  Batch x = Batch::Random(3, 4);
  const auto [y, d] = jvp(p, x, Batch::Zero(3, 4));
  CHECK(d.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("jvp: finite differences on random nets") {
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    const MlpParams p = make_mlp(3, {10, 10}, 2, Activation::Tanh, seed);
    const RefNet ref = RefNet::from(p);
    Rng rng(seed + 200);
    Vector x(3), t(3);
    for (int i = 0; i < 3; ++i) {
      x(i) = rng.normal();
      t(i) = rng.normal();
    }
    const auto [y, d] = jvp(p, Batch(x.transpose()), Batch(t.transpose()));
    const auto fd = fd_directional(ref, to_std(x), to_std(t));
    std::vector<double> ours;
    for (Eigen::Index i = 0; i < d.cols(); ++i) ours.push_back(static_cast<double>(d(0, i)));
    check_close_rel(ours, fd, 1e-4);
  }
}

TEST_CASE("jvp: tangent shape mismatch is rejected") {
  const MlpParams p = make_mlp(3, {8}, 2, Activation::Tanh, 5);
  CHECK_THROWS_AS(jvp(p, Batch::Zero(2, 3), Batch::Zero(1, 3)), std::invalid_argument);
}

TEST_CASE("jvp: directional output is linear in the tangent (double path)") {
  const auto p = cast_params<double>(make_mlp(3, {10, 10}, 2, Activation::Tanh, 21));
  Rng rng(77);
  MatrixT<double> x(2, 3), t1(2, 3), t2(2, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = rng.normal();
    t1.data()[i] = rng.normal();
    t2.data()[i] = rng.normal();
  }
  const double a = 0.37, b = -1.25;
  const auto [y1, da] = jvp(p, x, MatrixT<double>(a * t1 + b * t2));
  const auto [y2, d1] = jvp(p, x, t1);
  const auto [y3, d2] = jvp(p, x, t2);
  CHECK((da - (a * d1 + b * d2)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("jvp/grad transpose consistency for scalar outputs (double path)") {
  const auto p = cast_params<double>(make_mlp(4, {12, 12}, 1, Activation::Tanh, 31));
  Rng rng(78);
  MatrixT<double> x(1, 4), t(1, 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    x(0, i) = rng.normal();
    t(0, i) = rng.normal();
  }
  MatrixT<double> input_grad;
  grad(p, x, MatrixT<double>(MatrixT<double>::Ones(1, 1)), &input_grad);
  const auto [y, d] = jvp(p, x, t);
  const double lhs = (input_grad.array() * t.array()).sum();
  CHECK(std::abs(lhs - d(0, 0)) <= 1e-8);
}

TEST_CASE("stop_gradient: value identity") {
  Batch x(1, 2);
  x << 1, 2;
  const Batch y = stop_gradient(x);
  CHECK(y(0, 0) == 1.0f);
  CHECK(y(0, 1) == 2.0f);
}

TEST_CASE("stop_gradient: frozen target contributes 2(f-c) upstream only") {
  // loss = ||f_theta(x) - sg(c)||^2: gradient equals grad with upstream
  // 2 (f - c); the target side contributes nothing.
  const MlpParams p = make_mlp(2, {6}, 2, Activation::Tanh, 41);
  Batch x = Batch::Random(3, 2);
  const Batch c = stop_gradient(Batch(Batch::Random(3, 2)));
  const Batch f = forward(p, x);
  const MlpGrads g = grad(p, x, Batch(2.0f * (f - c)));
  const RefGrads ref =
      fd_param_grads(RefNet::from(p), rows_of(x), rows_of(Batch(2.0f * (f - c))));
  check_close_rel(flatten(g), flatten(ref), 1e-4);
}

TEST_CASE("adam: zero gradients from fresh state leave parameters unchanged") {
  MlpParams p = make_mlp(2, {4}, 1, Activation::Tanh, 51);
  const MlpParams before = p;
  OptState opt = make_opt_state(p, {0.1f});
  REQUIRE(adam_step(opt, p, zeros_like(p)));
  CHECK((p.layers[0].weight - before.layers[0].weight).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(opt.m.weight[0].cwiseAbs().maxCoeff() == 0.0f);
  CHECK(opt.step == 1);
}

TEST_CASE("adam: zero gradients decay existing moments toward zero") {
  MlpParams p = make_mlp(2, {4}, 1, Activation::Tanh, 51);
  OptState opt = make_opt_state(p, {0.1f});
  MlpGrads g = zeros_like(p);
  g.weight[0].setConstant(0.5f);
  adam_step(opt, p, g);
  const float m_before = opt.m.weight[0](0, 0);
  adam_step(opt, p, zeros_like(p));
  CHECK(opt.m.weight[0](0, 0) == doctest::Approx(0.9f * m_before));
}

TEST_CASE("adam: first-step closed form") {
  MlpParams p;
  p.layers.push_back({Batch::Zero(1, 1), Vector::Zero(1), Activation::Identity});
  p.layers[0].weight(0, 0) = 1.0f;
  OptState opt = make_opt_state(p, {0.1f});
  MlpGrads g = zeros_like(p);
  g.weight[0](0, 0) = 1.0f;
  adam_step(opt, p, g);
  // bias-corrected first step: w -= lr * g / (sqrt(g^2) + eps)
  CHECK(p.layers[0].weight(0, 0) == doctest::Approx(1.0f - 0.1f).epsilon(1e-5));
}

TEST_CASE("adam: 100 steps on (w-3)^2 converges like the scalar reference") {
  MlpParams p;
  p.layers.push_back({Batch::Zero(1, 1), Vector::Zero(1), Activation::Identity});
  OptState opt = make_opt_state(p, {0.1f});

  // independent scalar Adam in double
  double w_ref = 0.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  for (int step = 1; step <= 100; ++step) {
    const float w = p.layers[0].weight(0, 0);
    MlpGrads g = zeros_like(p);
    g.weight[0](0, 0) = 2.0f * (w - 3.0f);
    adam_step(opt, p, g);

    const double gr = 2.0 * (w_ref - 3.0);
    m = b1 * m + (1 - b1) * gr;
    v = b2 * v + (1 - b2) * gr * gr;
    const double mh = m / (1 - std::pow(b1, step));
    const double vh = v / (1 - std::pow(b2, step));
    w_ref -= lr * mh / (std::sqrt(vh) + eps);
  }
  CHECK(std::abs(p.layers[0].weight(0, 0) - 3.0f) <= 0.05f);
  CHECK(std::abs(w_ref - 3.0) <= 0.05);
  CHECK(std::abs(p.layers[0].weight(0, 0) - w_ref) <= 1e-3);
}

TEST_CASE("adam: non-finite gradients skip the update and are counted") {
  MlpParams p = make_mlp(2, {4}, 1, Activation::Tanh, 52);
  const MlpParams before = p;
  OptState opt = make_opt_state(p, {0.1f});
  MlpGrads g = zeros_like(p);
  g.bias[0](0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(adam_step(opt, p, g));
  CHECK(opt.skipped == 1);
  CHECK(opt.step == 0);
  CHECK((p.layers[0].weight - before.layers[0].weight).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("adam: deterministic given (state, params, grads)") {
  auto run = [] {
    MlpParams p = make_mlp(3, {8}, 2, Activation::Tanh, 53);
    OptState opt = make_opt_state(p, {1e-3f});
    Rng rng(99);
    for (int i = 0; i < 5; ++i) {
      MlpGrads g = zeros_like(p);
      for (auto& w : g.weight)
        for (Eigen::Index j = 0; j < w.size(); ++j) w.data()[j] = rng.normal();
      adam_step(opt, p, g);
    }
    return p;
  };
  const MlpParams a = run();
  const MlpParams b = run();
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(std::memcmp(a.layers[l].weight.data(), b.layers[l].weight.data(),
                      sizeof(float) * a.layers[l].weight.size()) == 0);
  }
}

TEST_CASE("checkpoint: round trip is bit exact") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "fpmd_ckpt_test").string();
  const MlpParams actor = make_mlp(4, {16, 16}, 2, Activation::Tanh, 61);
  const MlpParams critic = make_mlp(6, {16}, 1, Activation::Gelu, 62);
  save_checkpoint(dir, {{"actor", actor}, {"critic", critic}}, {{"iteration", "123"}});

  const Checkpoint ck = load_checkpoint(dir);
  CHECK(ck.meta.at("iteration") == "123");
  REQUIRE(ck.has_net("actor"));
  REQUIRE(ck.has_net("critic"));
  const MlpParams& a2 = ck.net("actor");
  REQUIRE(a2.layers.size() == actor.layers.size());
  for (std::size_t l = 0; l < actor.layers.size(); ++l) {
    CHECK(a2.layers[l].act == actor.layers[l].act);
    CHECK(std::memcmp(a2.layers[l].weight.data(), actor.layers[l].weight.data(),
                      sizeof(float) * actor.layers[l].weight.size()) == 0);
    CHECK(std::memcmp(a2.layers[l].bias.data(), actor.layers[l].bias.data(),
                      sizeof(float) * actor.layers[l].bias.size()) == 0);
  }
  fs::remove_all(dir);
}

TEST_CASE("checkpoint: bad magic is rejected") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "fpmd_ckpt_bad").string();
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / "manifest.txt") << "NOT-A-CHECKPOINT\n";
  std::ofstream(fs::path(dir) / "params.bin").put(0);
  CHECK_THROWS(load_checkpoint(dir));
  fs::remove_all(dir);
}

}  // TEST_SUITE
