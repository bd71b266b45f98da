#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "icoden/hazard_net.hpp"
#include "icoden/rng.hpp"

using namespace icoden;

namespace {

// Independent scalar re-implementation of the forward pass, also exposing
// every pre-activation so finite-difference tests can stay away from ReLU
// kinks.
double reference_forward(const MLPParams& p, double lambda, double t, const Eigen::VectorXd& x,
                         double* min_preact_abs = nullptr) {
  Eigen::VectorXd h(p.shape.input_width());
  h[0] = t;
  h[1] = lambda;
  h.tail(x.size()) = x;
  double min_abs = 1e300;
  for (std::size_t l = 0; l + 1 < p.weights.size(); ++l) {
    Eigen::VectorXd z = p.weights[l] * h + p.biases[l];
    for (int i = 0; i < z.size(); ++i) min_abs = std::min(min_abs, std::abs(z[i]));
    h = z.cwiseMax(0.0);
  }
  const double z_out = (p.weights.back() * h + p.biases.back())[0];
  if (min_preact_abs) *min_preact_abs = min_abs;
  return std::log1p(std::exp(-std::abs(z_out))) + std::max(z_out, 0.0);
}

MLPParams random_params(const NetworkShape& shape, std::uint64_t seed, double scale = 0.7) {
  CounterRng rng(seed, 99);
  MLPParams p = MLPParams::zeros(shape);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < p.weights[l].cols(); ++j)
        p.weights[l](i, j) = rng.uniform(-scale, scale);
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i)
      p.biases[l][i] = rng.uniform(-scale, scale);
  }
  return p;
}

}  // namespace

TEST_CASE("parameter count matches dimension arithmetic") {
  NetworkShape shape{1, {10, 10}};
  MLPParams p = init_params(shape, 1);
  CHECK(p.size() == 161);  // (3*10+10) + (10*10+10) + (10*1+1)
}

TEST_CASE("init is deterministic per seed and respects the fan-in bound") {
  NetworkShape shape{3, {8, 8}};
  MLPParams a = init_params(shape, 42);
  MLPParams b = init_params(shape, 42);
  CHECK(a.flatten() == b.flatten());
  MLPParams c = init_params(shape, 43);
  CHECK(a.flatten() != c.flatten());

  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    const double bound = std::sqrt(6.0 / a.weights[l].cols());
    CHECK(a.weights[l].cwiseAbs().maxCoeff() < bound);
    CHECK(a.biases[l].isZero());
  }
}

TEST_CASE("all-zero parameters produce Softplus(0) = ln 2") {
  MLPParams p = MLPParams::zeros({2, {5, 5}});
  Eigen::VectorXd x(2);
  x << 0.3, -1.2;
  CHECK(forward(p, 0.7, 2.0, x) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
}

TEST_CASE("hand-computed single hidden unit") {
  // 1 hidden layer of width 1, all weights 1, biases 0, input (t=1, lambda=0, x=1):
  // Softplus(ReLU(2)) = ln(1 + e^2).
  NetworkShape shape{1, {1}};
  MLPParams p = MLPParams::zeros(shape);
  p.weights[0].setOnes();
  p.weights[1].setOnes();
  Eigen::VectorXd x(1);
  x << 1.0;
  CHECK(forward(p, 0.0, 1.0, x) == doctest::Approx(2.1269280110429725).epsilon(1e-12));
}

TEST_CASE("forward output is strictly positive and matches the scalar reference") {
  CounterRng rng(7, 1);
  NetworkShape shape{3, {6, 6}};
  for (int trial = 0; trial < 1000; ++trial) {
    MLPParams p = random_params(shape, trial);
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-2.0, 2.0);
    const double lambda = rng.uniform(0.0, 3.0);
    const double t = rng.uniform(0.0, 5.0);
    const double out = forward(p, lambda, t, x);
    CHECK(out > 0.0);
    CHECK(out == doctest::Approx(reference_forward(p, lambda, t, x)).epsilon(1e-13));
  }
}

TEST_CASE("vjp through zero weights has zero lambda sensitivity") {
  MLPParams p = MLPParams::zeros({2, {4, 4}});
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  const VjpResult r = vjp(p, 0.5, 1.0, x, 1.0);
  CHECK(r.d_lambda == 0.0);
  CHECK(r.d_theta.size() == static_cast<Eigen::Index>(p.size()));
}

TEST_CASE("vjp matches central finite differences") {
  NetworkShape shape{3, {5, 4}};
  CounterRng rng(11, 2);
  const double h = 1e-5;
  int tested = 0;
  for (int trial = 0; tested < 12 && trial < 200; ++trial) {
    MLPParams p = random_params(shape, 1000 + trial);
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-1.5, 1.5);
    const double lambda = rng.uniform(0.0, 2.0);
    const double t = rng.uniform(0.1, 3.0);

    double min_preact = 0.0;
    reference_forward(p, lambda, t, x, &min_preact);
    if (min_preact < 1e-7) continue;  // resample away from ReLU kinks
    ++tested;

    const VjpResult r = vjp(p, lambda, t, x, 1.0);

    const double fd_lambda =
        (forward(p, lambda + h, t, x) - forward(p, lambda - h, t, x)) / (2 * h);
    CHECK(std::abs(fd_lambda - r.d_lambda) <=
          1e-6 * std::max({std::abs(r.d_lambda), std::abs(fd_lambda), 1e-8}));

    Eigen::VectorXd theta = p.flatten();
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      const double fd = (forward(MLPParams::unflatten(shape, tp), lambda, t, x) -
                         forward(MLPParams::unflatten(shape, tm), lambda, t, x)) /
                        (2 * h);
      CHECK(std::abs(fd - r.d_theta[j]) <=
            1e-6 * std::max({std::abs(r.d_theta[j]), std::abs(fd), 1e-8}));
    }
  }
  CHECK(tested == 12);
}

TEST_CASE("vjp is linear in the cotangent") {
  NetworkShape shape{2, {5}};
  MLPParams p = random_params(shape, 8);
  Eigen::VectorXd x(2);
  x << 0.5, -0.25;
  const VjpResult r1 = vjp(p, 0.3, 1.2, x, 0.8);
  const VjpResult r2 = vjp(p, 0.3, 1.2, x, 1.6);
  CHECK(r2.d_lambda == doctest::Approx(2.0 * r1.d_lambda).epsilon(1e-13));
  for (Eigen::Index j = 0; j < r1.d_theta.size(); ++j)
    CHECK(r2.d_theta[j] == doctest::Approx(2.0 * r1.d_theta[j]).epsilon(1e-13));
}

TEST_CASE("flatten/unflatten round-trips bitwise") {
  NetworkShape shape{4, {7, 3}};
  MLPParams p = random_params(shape, 21);
  const Eigen::VectorXd theta = p.flatten();
  const MLPParams q = MLPParams::unflatten(shape, theta);
  CHECK(q.flatten() == theta);
}

TEST_CASE("l1 penalty and subgradient") {
  // theta = [1, -2, 0, ...] through the flat layout.
  NetworkShape shape{1, {1}};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(6);
  theta[0] = 1.0;
  theta[1] = -2.0;
  MLPParams p = MLPParams::unflatten(shape, theta);
  CHECK(l1_penalty(p) == 3.0);
  const Eigen::VectorXd sub = l1_subgradient(p);
  CHECK(sub[0] == 1.0);
  CHECK(sub[1] == -1.0);
  CHECK(sub[2] == 0.0);

  MLPParams zero = MLPParams::zeros(shape);
  CHECK(l1_penalty(zero) == 0.0);

  MLPParams doubled = MLPParams::unflatten(shape, (2.0 * theta).eval());
  CHECK(l1_penalty(doubled) == 2.0 * l1_penalty(p));
}

TEST_CASE("model JSON round trip") {
  NetworkShape shape{2, {4, 3}};
  MLPParams p = random_params(shape, 77);
  save_model("/tmp/icoden_model_test.json", p, 77);
  std::uint64_t seed = 0;
  MLPParams q = load_model("/tmp/icoden_model_test.json", &seed);
  CHECK(seed == 77);
  CHECK(q.flatten() == p.flatten());
}
