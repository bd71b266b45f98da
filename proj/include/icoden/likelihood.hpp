#pragma once

#include <Eigen/Core>

#include "icoden/core_data.hpp"
#include "icoden/ode_engine.hpp"

namespace icoden {

// Cumulative hazards of one subject at its truncation time and interval
// endpoints; lambda_r is +inf for right-censored subjects.
struct SubjectLikTerms {
  double lambda_v = 0.0;
  double lambda_l = 0.0;
  double lambda_r = kInf;
};

// log[exp(-L(l)) - exp(-L(r))] + L(v), computed through expm1 so nearly equal
// endpoints stay stable.
double subject_loglik(const SubjectLikTerms& terms);

struct DatasetLoss {
  double loss = 0.0;        // negative log-likelihood + alpha * ||theta||_1
  double negloglik = 0.0;   // unpenalized part
  Eigen::VectorXd grad;     // empty unless requested
};

DatasetLoss dataset_loss(const MLPParams& params, const Dataset& d, double alpha,
                         const ODEConfig& cfg, int workers = 1);

// Loss plus its gradient: one backward adjoint pass per distinct finite
// endpoint, weighted by the interval-probability ratios on dLambda(L)/dtheta
// and dLambda(R)/dtheta, plus the truncation term and the L1 subgradient.
DatasetLoss dataset_loss_grad(const MLPParams& params, const Dataset& d, double alpha,
                              const ODEConfig& cfg, int workers = 1);

}  // namespace icoden
