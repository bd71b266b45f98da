#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "icoden/likelihood.hpp"
#include "icoden/rng.hpp"

using namespace icoden;

namespace {

MLPParams random_params(const NetworkShape& shape, std::uint64_t seed, double scale = 0.5) {
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

Dataset random_dataset(int n, int p, std::uint64_t seed, bool with_truncation = false) {
  CounterRng rng(seed, 5);
  Dataset d;
  d.schema = CovariateSchema::continuous(p);
  d.has_truncation = with_truncation;
  for (int i = 0; i < n; ++i) {
    Subject s;
    s.x.resize(p);
    for (int j = 0; j < p; ++j) s.x[j] = rng.uniform(-1.0, 1.0);
    s.l = rng.uniform(0.0, 1.5);
    if (rng.bernoulli(0.3)) s.r = kInf;
    else s.r = s.l + rng.uniform(0.2, 1.5);
    if (with_truncation && rng.bernoulli(0.5)) s.v = rng.uniform(0.0, s.l);
    d.subjects.push_back(std::move(s));
  }
  return d;
}

}  // namespace

TEST_CASE("right-censored branch") {
  CHECK(subject_loglik({0.0, 1.0, kInf}) == -1.0);
}

TEST_CASE("interval branch matches direct arithmetic") {
  CHECK(subject_loglik({0.0, 1.0, 2.0}) ==
        doctest::Approx(-1.4586751453870819).epsilon(1e-12));
  // Left-censored case: L = 0.
  CHECK(subject_loglik({0.0, 0.0, 0.5}) ==
        doctest::Approx(-0.93275212956718857).epsilon(1e-12));
}

TEST_CASE("stable form equals the naive formula whenever representable") {
  // "Representable" requires the naive difference to keep full precision:
  // exp(-L(l)) - exp(-L(r)) loses ~eps/delta relative accuracy, so the naive
  // side is only a valid reference for non-cancelling widths.
  CounterRng rng(3, 9);
  for (int trial = 0; trial < 5000; ++trial) {
    const double lam_l = rng.uniform(0.0, 30.0);
    const double delta = std::pow(10.0, rng.uniform(-2.0, 2.0));
    const double naive_diff = std::exp(-lam_l) - std::exp(-lam_l - delta);
    if (!(naive_diff > 0.0)) continue;
    const double naive = std::log(naive_diff);
    const double stable = subject_loglik({0.0, lam_l, lam_l + delta});
    CHECK(std::abs(naive - stable) <= 1e-12 * std::max(1.0, std::abs(naive)));
  }
}

TEST_CASE("tiny interval widths stay finite") {
  CHECK(std::isfinite(subject_loglik({0.0, 1.0, 1.0 + 1e-14})));
  CHECK(std::isfinite(subject_loglik({0.0, 0.0, 1e-14})));
}

TEST_CASE("monotone in lambda_l with fixed width, monotone in width") {
  const double base = subject_loglik({0.0, 1.0, 1.5});
  CHECK(subject_loglik({0.0, 1.2, 1.7}) < base);   // larger lambda_l, same width
  CHECK(subject_loglik({0.0, 1.0, 1.8}) > base);   // same lambda_l, larger width
}

TEST_CASE("zero truncation hazard reduces the truncated form to the plain one") {
  const double plain = subject_loglik({0.0, 1.0, 2.0});
  const double truncated = subject_loglik({0.4, 1.0, 2.0});
  CHECK(truncated == doctest::Approx(plain + 0.4).epsilon(1e-12));
}

TEST_CASE("invalid term orderings are rejected") {
  CHECK_THROWS(subject_loglik({0.5, 0.4, 1.0}));   // lambda_v > lambda_l
  CHECK_THROWS(subject_loglik({0.0, 2.0, 1.0}));   // lambda_r < lambda_l
}

TEST_CASE("constant-hazard loss on a single right-censored subject") {
  MLPParams p = MLPParams::zeros({1, {4}});
  Dataset d;
  d.schema = CovariateSchema::continuous(1);
  Subject s;
  s.l = 1.0;
  s.x = Eigen::VectorXd::Zero(1);
  d.subjects.push_back(s);
  const DatasetLoss loss = dataset_loss(p, d, 0.0, ODEConfig{});
  CHECK(loss.loss == doctest::Approx(0.6931471805599453).epsilon(1e-8));
}

TEST_CASE("the penalty adds exactly alpha * ||theta||_1") {
  NetworkShape shape{2, {5}};
  MLPParams p = random_params(shape, 31);
  const Dataset d = random_dataset(8, 2, 100);
  const double base = dataset_loss(p, d, 0.0, ODEConfig{}).loss;
  const double penalized = dataset_loss(p, d, 0.7, ODEConfig{}).loss;
  CHECK(penalized - base == doctest::Approx(0.7 * l1_penalty(p)).epsilon(1e-12));
}

TEST_CASE("duplicating every subject doubles the unpenalized loss") {
  NetworkShape shape{2, {5}};
  MLPParams p = random_params(shape, 32);
  Dataset d = random_dataset(6, 2, 101);
  Dataset doubled = d;
  for (const Subject& s : d.subjects) doubled.subjects.push_back(s);
  const double single = dataset_loss(p, d, 0.0, ODEConfig{}).negloglik;
  const double twice = dataset_loss(p, doubled, 0.0, ODEConfig{}).negloglik;
  CHECK(twice == doctest::Approx(2.0 * single).epsilon(1e-12));
}

TEST_CASE("loss gradient matches central finite differences") {
  NetworkShape shape{2, {6, 6}};
  MLPParams p = random_params(shape, 33);
  const Dataset d = random_dataset(5, 2, 102, /*with_truncation=*/true);
  ODEConfig ode;
  const double alpha = 0.05;
  const DatasetLoss lg = dataset_loss_grad(p, d, alpha, ode);
  CHECK(std::isfinite(lg.loss));

  const double h = 1e-5;
  Eigen::VectorXd theta = p.flatten();
  int checked = 0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (theta[j] == 0.0) continue;  // L1 kink at exactly zero
    Eigen::VectorXd tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    const double fd = (dataset_loss(MLPParams::unflatten(shape, tp), d, alpha, ode).loss -
                       dataset_loss(MLPParams::unflatten(shape, tm), d, alpha, ode).loss) /
                      (2 * h);
    if (std::abs(lg.grad[j]) > 1e-8) {
      CHECK(std::abs(fd - lg.grad[j]) <= 1e-4 * std::abs(lg.grad[j]));
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("right-censored-only gradient is the sum of adjoint endpoint gradients") {
  NetworkShape shape{1, {5}};
  MLPParams p = random_params(shape, 34);
  Dataset d;
  d.schema = CovariateSchema::continuous(1);
  for (int i = 0; i < 4; ++i) {
    Subject s;
    s.l = 0.5 + 0.25 * i;
    s.x = Eigen::VectorXd::Constant(1, i * 0.3 - 0.4);
    d.subjects.push_back(s);
  }
  ODEConfig ode;
  const DatasetLoss lg = dataset_loss_grad(p, d, 0.0, ode);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(lg.grad.size());
  for (const Subject& s : d.subjects) expected += solve_adjoint(p, s.x, s.l, ode).grad;
  CHECK((lg.grad - expected).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("alpha moves the gradient by exactly sign(theta)") {
  NetworkShape shape{2, {4}};
  MLPParams p = random_params(shape, 35);
  const Dataset d = random_dataset(5, 2, 103);
  ODEConfig ode;
  const Eigen::VectorXd g0 = dataset_loss_grad(p, d, 0.0, ode).grad;
  const Eigen::VectorXd g1 = dataset_loss_grad(p, d, 1.0, ode).grad;
  const Eigen::VectorXd sign = l1_subgradient(p);
  CHECK((g1 - g0 - sign).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("deduplicated endpoints keep the gradient consistent with brute assembly") {
  // v == l for one subject, shared finite endpoints across subjects.
  NetworkShape shape{1, {4}};
  MLPParams p = random_params(shape, 36);
  Dataset d;
  d.schema = CovariateSchema::continuous(1);
  d.has_truncation = true;
  Subject a;
  a.v = 0.5;
  a.l = 0.5;
  a.r = 1.5;
  a.x = Eigen::VectorXd::Constant(1, 0.2);
  Subject b;
  b.v = 0.25;
  b.l = 1.0;
  b.r = kInf;
  b.x = Eigen::VectorXd::Constant(1, 0.2);
  d.subjects = {a, b};
  ODEConfig ode;
  const DatasetLoss lg = dataset_loss_grad(p, d, 0.0, ode);

  const double h = 1e-6;
  Eigen::VectorXd theta = p.flatten();
  for (Eigen::Index j = 0; j < theta.size(); j += 3) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    const double fd = (dataset_loss(MLPParams::unflatten(shape, tp), d, 0.0, ode).loss -
                       dataset_loss(MLPParams::unflatten(shape, tm), d, 0.0, ode).loss) /
                      (2 * h);
    CHECK(std::abs(fd - lg.grad[j]) <= 1e-5 * std::max(1.0, std::abs(lg.grad[j])));
  }
}

TEST_CASE("worker count does not change the gradient") {
  NetworkShape shape{3, {8, 8}};
  MLPParams p = random_params(shape, 37);
  const Dataset d = random_dataset(40, 3, 104);
  const DatasetLoss a = dataset_loss_grad(p, d, 0.1, ODEConfig{}, 1);
  const DatasetLoss b = dataset_loss_grad(p, d, 0.1, ODEConfig{}, 2);
  CHECK(a.loss == b.loss);
  CHECK(a.grad == b.grad);
}
