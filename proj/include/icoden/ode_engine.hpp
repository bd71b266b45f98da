#pragma once

#include <Eigen/Core>
#include <functional>

#include "icoden/hazard_net.hpp"

namespace icoden {

enum class OdeMethod { kRK4, kDopri45 };

struct ODEConfig {
  OdeMethod method = OdeMethod::kRK4;
  int n_steps = 32;        // fixed-step RK4 on rescaled time s in [0,1]
  double rtol = 1e-6;      // adaptive method only
  double atol = 1e-8;
  int max_steps = 10000;

  void validate() const;
};

// Generic scalar integrators over a right-hand side y' = rhs(y, t). The fixed
// RK4 form doubles as the test hook for synthetic right-hand sides.
double integrate_rk4(const std::function<double(double, double)>& rhs, double y0, double t0,
                     double t1, int n_steps);
double integrate_dopri45(const std::function<double(double, double)>& rhs, double y0, double t0,
                         double t1, const ODEConfig& cfg);

// Cumulative hazard at t_eval: integrates dL/dt = f(L, t, x) from L(0)=0 on
// rescaled time (dL/ds = t_eval * f(L, s*t_eval, x), s in [0,1]).
double solve_cumhaz(const MLPParams& params, const Eigen::VectorXd& x, double t_eval,
                    const ODEConfig& cfg);

// All queries advanced in lockstep on the shared rescaled-step schedule
// (fixed-step RK4). Rows of X pair with entries of t_eval.
Eigen::VectorXd batch_solve(const MLPParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                            const Eigen::Ref<const Eigen::VectorXd>& t_eval, const ODEConfig& cfg,
                            int workers = 1);

// Stage states of a forward lockstep solve, kept for the backward pass.
struct BatchTrajectory {
  int n_steps = 0;
  Eigen::MatrixXd stages;  // B x 4*n_steps: lambda fed to each RK4 stage
};

Eigen::VectorXd batch_solve_store(const MLPParams& params,
                                  const Eigen::Ref<const Eigen::MatrixXd>& X,
                                  const Eigen::Ref<const Eigen::VectorXd>& t_eval,
                                  const ODEConfig& cfg, BatchTrajectory& traj);

// Backward augmented system [f, -b df/dL, -b df/dtheta] from b(t_i)=1,
// grad(t_i)=0, run as the exact reverse of the stored forward steps. The
// result accumulated into `grad` is sum_q weights[q] * dLambda_q/dtheta; the
// optional b_out receives b(0) per query.
void batch_adjoint(const MLPParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                   const Eigen::Ref<const Eigen::VectorXd>& t_eval, const ODEConfig& cfg,
                   const BatchTrajectory& traj, const Eigen::Ref<const Eigen::VectorXd>& weights,
                   MLPParams& grad, Eigen::VectorXd* b_out = nullptr);

// Backward state of one query (see batch_adjoint); grad is flat over theta.
struct AdjointState {
  double lambda_cum = 0.0;
  double b = 1.0;
  Eigen::VectorXd grad;
};

// Forward value Lambda(t_i) plus dLambda(t_i)/dtheta from one backward solve.
AdjointState solve_adjoint(const MLPParams& params, const Eigen::VectorXd& x, double t_i,
                           const ODEConfig& cfg);

}  // namespace icoden
