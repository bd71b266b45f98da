#pragma once

#include <Eigen/Core>
#include <string>

#include "icoden/core_data.hpp"

namespace icoden {

// Lambda(t|x) = scale * t^shape * exp(beta.x), parameterized in logs so the
// positivity constraints disappear.
struct WeibullPHParams {
  double log_scale = 0.0;
  double log_shape = 0.0;
  Eigen::VectorXd beta;

  double scale() const { return std::exp(log_scale); }
  double shape() const { return std::exp(log_shape); }
};

double weibull_cumhaz(const WeibullPHParams& wp, const Eigen::VectorXd& x, double t);

// Interval-censored (optionally left-truncated) log-likelihood and its
// analytic gradient in (log_scale, log_shape, beta).
double weibull_loglik(const WeibullPHParams& wp, const Dataset& d,
                      Eigen::VectorXd* grad = nullptr);

struct WeibullFitConfig {
  int max_iters = 500;
  double tol = 1e-6;  // gradient infinity-norm
};

struct WeibullPHFit {
  WeibullPHParams params;
  bool converged = false;
  bool boundary = false;  // scale driven toward 0 (e.g. no events observed)
  int iterations = 0;
  double grad_norm = 0.0;
  double loglik = 0.0;
};

// BFGS with Armijo backtracking from a deterministic start.
WeibullPHFit fit_weibull_ph(const Dataset& d, const WeibullFitConfig& cfg = {});

SurvivalCurve weibull_predict_survival(const WeibullPHParams& wp, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& times);

void save_weibull(const std::string& path, const WeibullPHFit& fit);
WeibullPHFit load_weibull(const std::string& path);

}  // namespace icoden
