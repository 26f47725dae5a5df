#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fpmd/rng.hpp"
#include "fpmd/trainer.hpp"
#include "fpmd/validate.hpp"
#include "fpmd/wasserstein.hpp"

using namespace fpmd;

namespace {

Eigen::MatrixXd normal_cloud(Eigen::Index n, int d, double mu, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = mu + sigma * rng.normal();
  return x;
}

// exhaustive matching oracle for tiny instances
double brute_force_min_cost(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// an agent whose actor is a constant velocity field
Agent constant_field_agent(float cx, float cy) {
  TrainConfig cfg;
  cfg.env = "pointmass2d";
  cfg.hidden_width = 8;
  cfg.hidden_depth = 1;
  Agent agent = make_agent(cfg);
  agent.flow.net.layers.back().weight.setZero();
  agent.flow.net.layers.back().bias << cx, cy;
  return agent;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("w2: identical sets give zero") {
  const Eigen::MatrixXd a = normal_cloud(64, 2, 0, 1, 1);
  CHECK(empirical_w2({a, "a"}, {a, "a"}).distance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("w2: 1d translation example") {
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 0, 0;
  b << 1, 1;
  const W2Result r = empirical_w2({a, "a"}, {b, "b"});
  CHECK(r.distance == doctest::Approx(1.0));
  CHECK(r.exact);
}

TEST_CASE("w2: 1d gaussian fixture matches the closed form") {
  // W2(N(0,1), N(2,1)) = |mean difference| = 2
  const Eigen::MatrixXd a = normal_cloud(10000, 1, 0, 1, 11);
  const Eigen::MatrixXd b = normal_cloud(10000, 1, 2, 1, 12);
  CHECK(std::abs(empirical_w2({a, "a"}, {b, "b"}).distance - 2.0) <= 0.05);
}

TEST_CASE("w2: symmetric, nonnegative, translation covariant") {
  const Eigen::MatrixXd a = normal_cloud(128, 2, 0, 1, 21);
  const Eigen::MatrixXd b = normal_cloud(128, 2, 0.5, 1.2, 22);
  const double ab = empirical_w2({a, "a"}, {b, "b"}).distance;
  const double ba = empirical_w2({b, "b"}, {a, "a"}).distance;
  CHECK(ab >= 0.0);
  CHECK(std::abs(ab - ba) <= 1e-12);

  Eigen::MatrixXd at = a, bt = b;
  at.array() += 3.25;
  bt.array() += 3.25;
  const double shifted = empirical_w2({at, "a"}, {bt, "b"}).distance;
  CHECK(std::abs(shifted - ab) <= 1e-10);
}

TEST_CASE("w2: assignment solver agrees with brute force on small instances") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(6));  // 2..7
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        cost(i, j) = trial % 5 == 0 ? std::floor(rng.uniform(0, 4)) : rng.uniform(0, 10);
    CHECK(assignment_min_cost(cost) == doctest::Approx(brute_force_min_cost(cost)).epsilon(1e-9));
  }
}

TEST_CASE("w2: exact assignment equals sorted pairing in 1d") {
  Rng rng(41);
  Eigen::MatrixXd a(40, 1), b(40, 1);
  for (int i = 0; i < 40; ++i) {
    a(i, 0) = rng.normal();
    b(i, 0) = rng.normal(1.0f, 2.0f);
  }
  Eigen::MatrixXd cost(40, 40);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) cost(i, j) = (a(i, 0) - b(j, 0)) * (a(i, 0) - b(j, 0));
  const double via_assignment = std::sqrt(assignment_min_cost(cost) / 40.0);
  const double via_sort = w2_sorted_1d(a.col(0), b.col(0));
  CHECK(via_assignment == doctest::Approx(via_sort).epsilon(1e-10));
}

TEST_CASE("w2: large multivariate clouds fall back to sliced mode") {
  const Eigen::MatrixXd a = normal_cloud(600, 2, 0, 1, 51);
  const Eigen::MatrixXd b = normal_cloud(600, 2, 0, 1, 52);
  const W2Result r = empirical_w2({a, "a"}, {b, "b"});
  CHECK_FALSE(r.exact);
  // sliced distance between same-distribution clouds stays small
  CHECK(r.distance < 0.5);

  // translation still detected
  Eigen::MatrixXd bshift = b;
  bshift.col(0).array() += 3.0;
  CHECK(empirical_w2({a, "a"}, {bshift, "b"}).distance > 1.0);
}

TEST_CASE("w2: mismatched inputs are rejected") {
  const Eigen::MatrixXd a = normal_cloud(16, 2, 0, 1, 61);
  const Eigen::MatrixXd b = normal_cloud(16, 3, 0, 1, 62);
  const Eigen::MatrixXd c = normal_cloud(8, 2, 0, 1, 63);
  CHECK_THROWS_AS(empirical_w2({a, "a"}, {b, "b"}), std::invalid_argument);
  CHECK_THROWS_AS(empirical_w2({a, "a"}, {c, "c"}), std::invalid_argument);
  CHECK_THROWS_AS(empirical_w2({Eigen::MatrixXd(1, 1), "a"}, {Eigen::MatrixXd(1, 1), "b"}),
                  std::invalid_argument);
}

TEST_CASE("epsilon floor: positive, deterministic, grows with dimension") {
  const double e1 = epsilon_floor(256, 1);
  const double e2 = epsilon_floor(256, 2);
  CHECK(e1 > 0.0);
  CHECK(e2 > e1);
  CHECK(epsilon_floor(256, 1) == e1);  // cached/deterministic
  CHECK(epsilon_est(256, 1, 4.0) == doctest::Approx(4.0 * e1));
  CHECK(epsilon_est(256, 1, 0.0) == doctest::Approx(e1));  // unit-scale floor
}

TEST_CASE("straightness defect: straight segments score zero, bent paths do not") {
  auto vec2 = [](float x, float y) {
    Vector v(2);
    v << x, y;
    return v;
  };
  // collinear
  CHECK(straightness_defect({vec2(0, 0), vec2(0.5f, 0.5f), vec2(1, 1)}) <= 1e-6);
  // two points: no interior deviation possible
  CHECK(straightness_defect({vec2(0, 0), vec2(1, 0)}) == 0.0);
  // right-angle detour: midpoint sits 0.5 above a unit chord
  CHECK(straightness_defect({vec2(0, 0), vec2(0.5f, 0.5f), vec2(1, 0)}) ==
        doctest::Approx(0.5));
  // degenerate chord
  CHECK(straightness_defect({vec2(0, 0), vec2(1, 1), vec2(0, 0)}) == 0.0);
}

TEST_CASE("trajectories: constant field gives straight lines and K+1 points") {
  namespace fs = std::filesystem;
  const Agent agent = constant_field_agent(0.3f, -0.2f);

  const auto defects = trajectory_defects(agent, "pointmass2d", 2, 4, 20, 77);
  REQUIRE(defects.size() == 8);
  for (double d : defects) CHECK(d <= 1e-5);

  const std::string path = (fs::temp_directory_path() / "fpmd_traj_test.jsonl").string();
  dump_trajectories(agent, "pointmass2d", 2, 3, 1, path, 77);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["k"] == 1);
    CHECK(j["points"].size() == 2);  // K=1: exactly two points
    CHECK(j["points"][0][0] == 0.0);
    CHECK(j["points"][1][0] == 1.0);
    CHECK(j["variant"] == "fpmd-r");
    ++lines;
  }
  CHECK(lines == 6);
  fs::remove(path);
}

TEST_CASE("trajectories: 20-step dump has 21 strictly increasing times") {
  namespace fs = std::filesystem;
  const Agent agent = constant_field_agent(0.1f, 0.1f);
  const std::string path = (fs::temp_directory_path() / "fpmd_traj21.jsonl").string();
  dump_trajectories(agent, "pointmass2d", 1, 1, 20, path, 3);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  const auto j = nlohmann::json::parse(line);
  REQUIRE(j["points"].size() == 21);
  double prev = -1.0;
  for (const auto& pt : j["points"]) {
    CHECK(pt[0].get<double>() > prev);
    prev = pt[0].get<double>();
  }
  CHECK(prev == doctest::Approx(1.0));
  fs::remove(path);
}

TEST_CASE("one-step bound: near-prior untrained policy satisfies the bound") {
  // with a near-zero velocity field both clouds are the prior itself
  TrainConfig cfg;
  cfg.env = "twogoal";
  cfg.hidden_width = 16;
  cfg.hidden_depth = 2;
  Agent agent = make_agent(cfg);

  std::vector<Vector> states;
  for (int i = 0; i < 3; ++i) states.push_back(env_reset("twogoal", 100 + i).s);
  const auto reports = check_one_step_bound(agent.flow, states, 5);
  REQUIRE(reports.size() == 3);
  for (const auto& r : reports) {
    CHECK(r.ok);
    CHECK(r.w2_sq <= r.var_hat + r.eps_est);
    CHECK(r.var_hat > 0.5);  // prior variance, roughly 2 in 2d
  }
}

}  // TEST_SUITE
