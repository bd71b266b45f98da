#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "icoden/core_data.hpp"

namespace icoden {

// Generating law of one subject: S(t) = exp(-0.01 * e^eta * t^k). The simple
// example maps onto the same family with (k=1, eta=ln 200) and (k=2, eta=ln 200).
struct TruthRecord {
  double t_true = 0.0;
  double k = 1.0;
  double eta = 0.0;

  double cumulative_hazard(double t) const;
  double survival(double t) const;
};

struct SimulatedData {
  Dataset data;
  std::vector<TruthRecord> truth;
};

// T = (-ln u / (0.01 e^eta))^{1/k}, the inverse CDF of the family above.
double invert_survival(double u, double k, double eta);

struct SimpleConfig {
  int n = 1000;
  std::uint64_t seed = 0;
  double visit_rate = 0.1;  // gap ~ Exp(visit_rate)
  int n_visits = 20;
};

// One binary predictor; S(t|X=1)=exp(-2t^2), S(t|X=0)=exp(-2t); event time by
// inverse CDF; the observed interval is the visit gap containing the event,
// right-censored at the last visit otherwise.
SimulatedData gen_simple(const SimpleConfig& cfg);

struct ScenarioConfig {
  int scenario = 1;  // 1..4
  int n = 1000;
  int p = 20;
  std::uint64_t seed = 0;
  std::uint64_t beta_seed = 0;  // coefficients held constant across replicates
  double visit_rate = 0.1;
  double mean_visits = 12.0;

  void validate() const;
};

// MVN(0, Sigma) rows with Sigma_{jj'} = e^{-|j-j'|} via Cholesky; first 20%
// of columns stay continuous, next 20% become I(X>0), the rest
// I(X>-0.5)+I(X>0.5).
std::pair<Eigen::MatrixXd, CovariateSchema> gen_covariates(int n, int p, std::uint64_t seed);

// Coefficient vector for a scenario: 0.2 on continuous/binary columns,
// multinomial entries drawn once from MVN(0.2, 0.01*Sigma).
Eigen::VectorXd scenario_coefficients(int p, const CovariateSchema& schema,
                                      std::uint64_t beta_seed);

SimulatedData gen_scenario(const ScenarioConfig& cfg);

// Truth sidecar CSV: t_true,law,k,eta.
void write_truth(const std::string& path, const std::vector<TruthRecord>& truth);
std::vector<TruthRecord> load_truth(const std::string& path);

}  // namespace icoden
