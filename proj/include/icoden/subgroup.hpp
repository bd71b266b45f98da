#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "icoden/core_data.hpp"
#include "icoden/ode_engine.hpp"

namespace icoden {

// One maximal-support interval (q, p] of the NPMLE; p may be +inf.
struct TurnbullInterval {
  double q = 0.0;
  double p = 0.0;
};

// NPMLE of the survival function for interval-censored data. Survival is
// pinned outside the support intervals and only bracketed inside them, so the
// estimate is a band: lower(t) = 1 - mass{q_j < t}, upper(t) = 1 - mass{p_j <= t}.
struct TurnbullFit {
  std::vector<TurnbullInterval> intervals;
  Eigen::VectorXd masses;
  Eigen::VectorXd band_times;  // sorted observed finite endpoints
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  int iterations = 0;
  double max_delta = 0.0;

  double lower_at(double t) const;
  double upper_at(double t) const;
};

// Self-consistency EM on the interval masses until max |delta mass| < tol.
TurnbullFit turnbull(const Dataset& d, double tol = 1e-8, int max_iter = 10000);

struct GMMFit {
  int k = 1;
  Eigen::VectorXd weights;
  Eigen::VectorXd means;
  Eigen::VectorXd variances;
  Eigen::MatrixXd responsibilities;  // n x k
  std::vector<int> labels;           // argmax responsibility
  std::vector<double> loglik_trace;
};

// 1-D Gaussian-mixture EM; quantile-anchored means, variance floor 1e-8,
// stops when the log-likelihood gain drops below 1e-9.
GMMFit gmm_fit(const std::vector<double>& values, int k, std::uint64_t seed);

struct SubgroupResult {
  std::vector<int> labels;
  std::vector<double> log_cumhaz;
  GMMFit gmm;
};

// Clusters log Lambda(t_star | x_i); k = 0 selects the component count in
// 1..4 by BIC.
SubgroupResult identify_subgroups(const MLPParams& params, const Dataset& d, double t_star, int k,
                                  std::uint64_t seed, const ODEConfig& ode, int workers = 1);

}  // namespace icoden
