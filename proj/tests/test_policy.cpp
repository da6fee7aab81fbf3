#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dmd/policy.hpp"
#include "dmd/rng.hpp"

using namespace dmd;

namespace {

std::vector<double> random_input(int dim, Rng& rng) {
  std::vector<double> x(dim);
  for (double& v : x) v = rng.uniform_int(-1, 1);
  return x;
}

// central finite differences of log pi(a|x) wrt every parameter
double max_rel_err_vs_fd(PolicyParams& p, const std::vector<double>& x, int action,
                         double eps = 1e-5) {
  ForwardCache cache;
  forward(p, x, &cache);
  Gradients g = grad_log_prob(p, cache, action);
  double worst = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + eps;
    const double up = std::log(forward(p, x)[action]);
    param = saved - eps;
    const double dn = std::log(forward(p, x)[action]);
    param = saved;
    const double fd = (up - dn) / (2.0 * eps);
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
    worst = std::max(worst, std::abs(fd - analytic) / denom);
  };
  for (size_t l = 0; l < p.layers.size(); ++l) {
    for (size_t i = 0; i < p.layers[l].w.size(); i += 7)  // sampled for speed
      probe(p.layers[l].w[i], g.layers[l].w[i]);
    for (size_t i = 0; i < p.layers[l].b.size(); ++i)
      probe(p.layers[l].b[i], g.layers[l].b[i]);
  }
  return worst;
}

}  // namespace

TEST_CASE("init is deterministic and bounded") {
  auto p1 = init_params({10, 8, 4}, 5);
  auto p2 = init_params({10, 8, 4}, 5);
  for (size_t l = 0; l < p1.layers.size(); ++l) {
    CHECK(p1.layers[l].w == p2.layers[l].w);
    for (double b : p1.layers[l].b) CHECK(b == 0.0);
    const double bound = std::sqrt(6.0 / p1.layers[l].in);
    for (double w : p1.layers[l].w) CHECK(std::abs(w) <= bound);
  }
  auto p3 = init_params({10, 8, 4}, 6);
  CHECK(p1.layers[0].w != p3.layers[0].w);
}

TEST_CASE("zeroed weights give the uniform distribution") {
  auto p = init_params({6, 4, 5}, 0);
  for (auto& layer : p.layers) std::fill(layer.w.begin(), layer.w.end(), 0.0);
  auto probs = forward(p, std::vector<double>(6, 1.0));
  for (double v : probs) CHECK(v == Catch::Approx(0.2).margin(1e-12));
}

TEST_CASE("forward output is a probability vector") {
  Rng rng(3, "fw");
  auto p = init_params({12, 16, 8, 5}, 3);
  for (int trial = 0; trial < 20; ++trial) {
    auto probs = forward(p, random_input(12, rng));
    double sum = 0.0;
    for (double v : probs) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  }
  CHECK_THROWS_AS(forward(p, std::vector<double>(11, 0.0)), std::invalid_argument);
}

TEST_CASE("softmax is invariant to a constant logit shift") {
  Rng rng(4, "shift");
  auto p = init_params({8, 6, 4}, 4);
  auto x = random_input(8, rng);
  auto base = forward(p, x);
  auto& last = p.layers.back();
  for (double& b : last.b) b += 3.7;  // same constant on every logit
  auto shifted = forward(p, x);
  for (size_t i = 0; i < base.size(); ++i)
    CHECK(shifted[i] == Catch::Approx(base[i]).margin(1e-12));
}

TEST_CASE("log-prob gradient matches finite differences") {
  Rng rng(9, "fd");
  auto p = init_params({15, 10, 6, 4}, 9);
  for (int trial = 0; trial < 3; ++trial) {
    auto x = random_input(15, rng);
    const int action = rng.uniform_int(0, 3);
    CHECK(max_rel_err_vs_fd(p, x, action) < 1e-4);
  }
}

TEST_CASE("greedy selection takes the argmax, lowest index on ties") {
  Rng rng(0);
  CHECK(select_action({0.7, 0.3}, SelectMode::Greedy, rng).v == 0);
  CHECK(select_action({0.2, 0.4, 0.4}, SelectMode::Greedy, rng).v == 1);
}

TEST_CASE("sampling from a one-hot distribution is deterministic") {
  Rng rng(1, "onehot");
  for (int i = 0; i < 50; ++i)
    CHECK(select_action({0.0, 0.0, 1.0, 0.0}, SelectMode::Sample, rng).v == 2);
}

TEST_CASE("sampling frequencies track the distribution") {
  Rng rng(2, "freq");
  int count0 = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    if (select_action({0.5, 0.5}, SelectMode::Sample, rng).v == 0) ++count0;
  CHECK(std::abs(static_cast<double>(count0) / draws - 0.5) < 0.01);
}

TEST_CASE("supervised training memorizes a single example") {
  auto p = init_params({10, 8, 3}, 7);
  Rng rng(7, "mem");
  LabeledState ex{random_input(10, rng), 2};
  train_supervised(p, {ex}, 200, 0.1);
  Rng dummy(0);
  CHECK(select_action(forward(p, ex.state), SelectMode::Greedy, dummy).v == 2);
}

TEST_CASE("zero epochs and zero lr leave parameters unchanged") {
  auto p = init_params({6, 4, 3}, 11);
  auto w0 = p.layers[0].w;
  Rng rng(11, "z");
  std::vector<LabeledState> data{{random_input(6, rng), 0}, {random_input(6, rng), 1}};
  train_supervised(p, data, 0, 0.1);
  CHECK(p.layers[0].w == w0);
  train_supervised(p, data, 5, 0.0);
  CHECK(p.layers[0].w == w0);
}

TEST_CASE("empty dataset and bad labels are usage errors") {
  auto p = init_params({6, 4, 3}, 12);
  CHECK_THROWS_AS(train_supervised(p, {}, 1, 0.1), std::invalid_argument);
  std::vector<LabeledState> bad{{std::vector<double>(6, 0.0), 3}};
  CHECK_THROWS_AS(train_supervised(p, bad, 1, 0.1), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip through JSON") {
  auto p = init_params({9, 5, 4}, 13);
  const std::string path = "/tmp/dmd_policy_test.json";
  save_policy(p, path);
  auto q = load_policy(path);
  CHECK(q.dims == p.dims);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(q.layers[l].w == p.layers[l].w);
    CHECK(q.layers[l].b == p.layers[l].b);
  }
  nlohmann::json j = to_json(p);
  j["format_version"] = 99;
  CHECK_THROWS_AS(policy_from_json(j), std::invalid_argument);
}
