#pragma once

#include <Eigen/Core>
#include <vector>

#include "icoden/core_data.hpp"
#include "icoden/ode_engine.hpp"
#include "icoden/simulator.hpp"

namespace icoden {

struct EvaluationConfig {
  int grid_points = 200;  // trapezoid resolution per integral

  void validate() const;
};

// Horizon u for the IBS integral: the maximum finite value among all observed
// L and R. Computed from the data, never configured.
double ibs_horizon(const Dataset& d);

// S(t) = exp(-Lambda(t)) on the given grid; (0, 1) is prepended when absent.
SurvivalCurve predict_survival(const MLPParams& params, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& times, const ODEConfig& ode,
                               int workers = 1);

// (1/n) sum_i (1/T_i) int_0^{T_i} (S - S_hat)^2 dt against the generating law.
double mse_survival(const MLPParams& params, const Dataset& d,
                    const std::vector<TruthRecord>& truth, const EvaluationConfig& cfg,
                    const ODEConfig& ode, int workers = 1);

// Survival-status surrogate for I(T_i > t): 1 before L, 0 after R, the
// normalized survival drop inside (L, R]. Right-censored subjects use
// S_hat(R) = 0. A flat segment (S_hat(L) == S_hat(R)) maps to 0.5 and bumps
// the counter when one is supplied.
double surrogate_indicator(double t, const Subject& subject, const MLPParams& params,
                           const ODEConfig& ode, long* degenerate_counter = nullptr);

double ibs(const MLPParams& params, const Dataset& d, const EvaluationConfig& cfg,
           const ODEConfig& ode, int workers = 1);

struct MedianPrediction {
  double t_median = kInf;  // +inf when S_hat never crosses 0.5 on the search range
};

// Solves Lambda(t) = ln 2 by bisection after doubling the bracket from 1 up
// to 2^10.
MedianPrediction predict_median(const MLPParams& params, const Eigen::VectorXd& x,
                                const ODEConfig& ode);

// Fraction of predicted medians outside (L, R], and the mean distance from
// the median to the nearest finite interval boundary (computed over all
// subjects; the R term is dropped when R = +inf).
double p_out(const MLPParams& params, const Dataset& d, const ODEConfig& ode, int workers = 1);
double d_out(const MLPParams& params, const Dataset& d, const ODEConfig& ode, int workers = 1);

// Shared bisection pass so p_out/d_out and the CLI evaluate medians once.
Eigen::VectorXd predict_medians(const MLPParams& params, const Dataset& d, const ODEConfig& ode,
                                int workers = 1);

}  // namespace icoden
