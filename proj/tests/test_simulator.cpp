#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "icoden/simulator.hpp"

using namespace icoden;

TEST_CASE("inverse-CDF event times for the simple example laws") {
  const double eta = std::log(200.0);  // 0.01 e^eta = 2
  // X=0: S(t)=exp(-2t); U=0.5 -> -ln(0.5)/2.
  CHECK(invert_survival(0.5, 1.0, eta) ==
        doctest::Approx(0.34657359027997265).epsilon(1e-12));
  // X=1: S(t)=exp(-2t^2); U=0.5 -> sqrt(-ln(0.5)/2).
  CHECK(invert_survival(0.5, 2.0, eta) ==
        doctest::Approx(0.58870501125773735).epsilon(1e-12));
}

TEST_CASE("inverse-CDF event times for the scenario baselines") {
  // S0(t) = exp(-0.01 t^10): U=0.5 -> (ln 2/0.01)^(1/10).
  CHECK(invert_survival(0.5, 10.0, 0.0) ==
        doctest::Approx(1.5278564294421199).epsilon(1e-12));
  // Flatter arm k=5 of the non-PH scenarios.
  CHECK(invert_survival(0.5, 5.0, 0.0) ==
        doctest::Approx(2.3343452689876236).epsilon(1e-12));
}

TEST_CASE("truth records are self-consistent") {
  SimpleConfig cfg;
  cfg.n = 300;
  cfg.seed = 5;
  const SimulatedData sim = gen_simple(cfg);
  for (const TruthRecord& r : sim.truth) {
    CHECK(r.survival(0.0) == 1.0);
    CHECK(std::abs(r.survival(r.t_true) - std::exp(-r.cumulative_hazard(r.t_true))) <= 1e-12);
    double prev = 1.0;
    for (int g = 1; g <= 100; ++g) {
      const double s = r.survival(0.05 * g);
      CHECK(s <= prev + 1e-15);
      prev = s;
    }
  }
}

TEST_CASE("simple example: containment of the true event time") {
  SimpleConfig cfg;
  cfg.n = 500;
  cfg.seed = 11;
  const SimulatedData sim = gen_simple(cfg);
  REQUIRE(sim.data.size() == 500);
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    const Subject& s = sim.data.subjects[i];
    const double t = sim.truth[i].t_true;
    CHECK(s.l < t);
    if (!s.right_censored()) CHECK(t <= s.r);
    CHECK(s.v == 0.0);
  }
}

TEST_CASE("simple example: Bernoulli covariate frequency") {
  SimpleConfig cfg;
  cfg.n = 2000;
  cfg.seed = 21;
  const SimulatedData sim = gen_simple(cfg);
  double ones = 0;
  for (const Subject& s : sim.data.subjects) {
    CHECK((s.x[0] == 0.0 || s.x[0] == 1.0));
    ones += s.x[0];
  }
  const double rate = ones / cfg.n;
  CHECK(std::abs(rate - 0.5) <= 3.0 * std::sqrt(0.25 / cfg.n));
}

TEST_CASE("simple example is deterministic per seed") {
  SimpleConfig cfg;
  cfg.n = 50;
  cfg.seed = 33;
  const SimulatedData a = gen_simple(cfg);
  const SimulatedData b = gen_simple(cfg);
  for (int i = 0; i < cfg.n; ++i) {
    CHECK(a.data.subjects[i].l == b.data.subjects[i].l);
    CHECK(a.data.subjects[i].r == b.data.subjects[i].r);
    CHECK(a.truth[i].t_true == b.truth[i].t_true);
  }
}

TEST_CASE("covariate kinds split 20/20/60") {
  const auto [X, schema] = gen_covariates(50, 20, 3);
  int cont = 0, bin = 0, multi = 0;
  for (auto kind : schema.kinds) {
    if (kind == CovariateSchema::Kind::kContinuous) ++cont;
    else if (kind == CovariateSchema::Kind::kBinary) ++bin;
    else ++multi;
  }
  CHECK(cont == 4);
  CHECK(bin == 4);
  CHECK(multi == 12);
  for (int i = 0; i < X.rows(); ++i)
    for (int j = 0; j < 20; ++j) {
      if (schema.kinds[j] == CovariateSchema::Kind::kBinary)
        CHECK((X(i, j) == 0.0 || X(i, j) == 1.0));
      if (schema.kinds[j] == CovariateSchema::Kind::kMultinomial)
        CHECK((X(i, j) == 0.0 || X(i, j) == 1.0 || X(i, j) == 2.0));
    }
}

TEST_CASE("continuous block reproduces the AR(1)-style covariance") {
  const int n = 10000;
  const auto [X, schema] = gen_covariates(n, 20, 7);
  const int n_cont = 4;
  Eigen::MatrixXd block = X.leftCols(n_cont);
  const Eigen::RowVectorXd mean = block.colwise().mean();
  block.rowwise() -= mean;
  const Eigen::MatrixXd cov = block.transpose() * block / static_cast<double>(n - 1);
  Eigen::MatrixXd target(n_cont, n_cont);
  for (int i = 0; i < n_cont; ++i)
    for (int j = 0; j < n_cont; ++j) target(i, j) = std::exp(-std::abs(i - j));
  CHECK((cov - target).norm() < 0.1);
}

TEST_CASE("scenario coefficients are fixed by beta_seed and 0.2 off the multinomial block") {
  const auto [X, schema] = gen_covariates(10, 20, 1);
  const Eigen::VectorXd beta1 = scenario_coefficients(20, schema, 42);
  const Eigen::VectorXd beta2 = scenario_coefficients(20, schema, 42);
  CHECK(beta1 == beta2);
  const Eigen::VectorXd beta3 = scenario_coefficients(20, schema, 43);
  CHECK(beta1 != beta3);
  for (int j = 0; j < 20; ++j) {
    if (schema.kinds[j] != CovariateSchema::Kind::kMultinomial) CHECK(beta1[j] == 0.2);
    else CHECK(std::abs(beta1[j] - 0.2) < 1.0);  // MVN(0.2, 0.01*Sigma) draw
  }
}

TEST_CASE("replicates with a shared beta_seed share coefficients") {
  ScenarioConfig a;
  a.scenario = 4;
  a.n = 30;
  a.p = 20;
  a.seed = 1;
  a.beta_seed = 9;
  ScenarioConfig b = a;
  b.seed = 2;
  const SimulatedData da = gen_scenario(a);
  const SimulatedData db = gen_scenario(b);
  // Same covariate row must map to the same eta under both replicates.
  bool found_different_data = false;
  for (int i = 0; i < a.n; ++i)
    if (da.data.subjects[i].l != db.data.subjects[i].l) found_different_data = true;
  CHECK(found_different_data);
  const Eigen::VectorXd beta = scenario_coefficients(20, da.data.schema, 9);
  for (int i = 0; i < a.n; ++i) {
    const Subject& s = da.data.subjects[i];
    const double eta = beta.dot(s.x) + s.x[0] * s.x[0] + s.x[1] * s.x[1] + s.x[2] * s.x[3];
    CHECK(da.truth[i].eta == doctest::Approx(eta).epsilon(1e-12));
  }
}

TEST_CASE("scenario containment and the non-PH shape switch") {
  ScenarioConfig cfg;
  cfg.scenario = 3;
  cfg.n = 400;
  cfg.p = 20;
  cfg.seed = 17;
  cfg.beta_seed = 3;
  const SimulatedData sim = gen_scenario(cfg);
  const int first_binary = 4;  // p=20: 4 continuous then 4 binary
  for (int i = 0; i < cfg.n; ++i) {
    const Subject& s = sim.data.subjects[i];
    const double t = sim.truth[i].t_true;
    CHECK(s.l < t);
    if (!s.right_censored()) CHECK(t <= s.r);
    CHECK(sim.truth[i].k == (s.x[first_binary] == 1.0 ? 5.0 : 10.0));
  }
}

TEST_CASE("scenario preconditions") {
  ScenarioConfig cfg;
  cfg.scenario = 2;
  cfg.p = 4;
  CHECK_THROWS(cfg.validate());
  cfg.scenario = 3;
  CHECK_THROWS(cfg.validate());
  cfg.p = 5;
  CHECK_NOTHROW(cfg.validate());
  cfg.scenario = 5;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("truth sidecar round trip") {
  SimpleConfig cfg;
  cfg.n = 25;
  cfg.seed = 2;
  const SimulatedData sim = gen_simple(cfg);
  write_truth("/tmp/icoden_truth_test.csv", sim.truth);
  const auto loaded = load_truth("/tmp/icoden_truth_test.csv");
  REQUIRE(loaded.size() == sim.truth.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].t_true == sim.truth[i].t_true);
    CHECK(loaded[i].k == sim.truth[i].k);
    CHECK(loaded[i].eta == sim.truth[i].eta);
  }
}
