#include "icoden/ode_engine.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "icoden/core_data.hpp"
#include "icoden/parallel.hpp"

namespace icoden {

namespace {

constexpr Eigen::Index kChunkRows = 256;  // fixed so results do not depend on worker count

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

[[noreturn]] void fail_nonfinite(const MLPParams& params, double t_eval_max) {
  fail("non-finite state in ODE solve (theta L2 norm " +
       format_double(params.flatten().norm()) + ", t_eval up to " + format_double(t_eval_max) +
       ")");
}

// Lockstep RK4 over one chunk of queries on rescaled time. Stage lambda
// inputs are recorded when traj is non-null.
Eigen::VectorXd lockstep_forward(const MLPParams& params,
                                 const Eigen::Ref<const Eigen::MatrixXd>& X,
                                 const Eigen::Ref<const Eigen::VectorXd>& t_eval, int n_steps,
                                 BatchTrajectory* traj) {
  const Eigen::Index b = X.rows();
  const double h = 1.0 / n_steps;
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(b);
  Eigen::VectorXd f(b), g1(b), g2(b), g3(b), g4(b), stage(b);
  if (traj) {
    traj->n_steps = n_steps;
    traj->stages.resize(b, 4 * n_steps);
  }
  for (int k = 0; k < n_steps; ++k) {
    const double s0 = k * h;
    if (traj) traj->stages.col(4 * k) = lam;
    forward_batch(params, X, (s0 * t_eval).eval(), lam, f);
    g1 = t_eval.cwiseProduct(f);

    stage = lam + (h / 2) * g1;
    if (traj) traj->stages.col(4 * k + 1) = stage;
    forward_batch(params, X, ((s0 + h / 2) * t_eval).eval(), stage, f);
    g2 = t_eval.cwiseProduct(f);

    stage = lam + (h / 2) * g2;
    if (traj) traj->stages.col(4 * k + 2) = stage;
    forward_batch(params, X, ((s0 + h / 2) * t_eval).eval(), stage, f);
    g3 = t_eval.cwiseProduct(f);

    stage = lam + h * g3;
    if (traj) traj->stages.col(4 * k + 3) = stage;
    forward_batch(params, X, ((s0 + h) * t_eval).eval(), stage, f);
    g4 = t_eval.cwiseProduct(f);

    lam += (h / 6) * (g1 + 2 * g2 + 2 * g3 + g4);
    if (!lam.allFinite()) fail_nonfinite(params, t_eval.cwiseAbs().maxCoeff());
  }
  return lam;
}

// Exact reverse of lockstep_forward for one chunk; see batch_adjoint.
void lockstep_backward(const MLPParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                       const Eigen::Ref<const Eigen::VectorXd>& t_eval,
                       const BatchTrajectory& traj,
                       const Eigen::Ref<const Eigen::VectorXd>& weights, MLPParams& grad,
                       Eigen::VectorXd* b_out) {
  const Eigen::Index b = X.rows();
  const int n_steps = traj.n_steps;
  const double h = 1.0 / n_steps;
  Eigen::VectorXd lbar = weights;
  Eigen::VectorXd gbar(b), da1(b), da2(b), da3(b), da4(b);
  for (int k = n_steps - 1; k >= 0; --k) {
    const double s0 = k * h;
    const auto a1 = traj.stages.col(4 * k);
    const auto a2 = traj.stages.col(4 * k + 1);
    const auto a3 = traj.stages.col(4 * k + 2);
    const auto a4 = traj.stages.col(4 * k + 3);

    gbar = (h / 6) * lbar;
    vjp_batch(params, X, ((s0 + h) * t_eval).eval(), a4, gbar.cwiseProduct(t_eval).eval(), da4,
              grad);
    gbar = (h / 3) * lbar + h * da4;
    vjp_batch(params, X, ((s0 + h / 2) * t_eval).eval(), a3, gbar.cwiseProduct(t_eval).eval(), da3,
              grad);
    gbar = (h / 3) * lbar + (h / 2) * da3;
    vjp_batch(params, X, ((s0 + h / 2) * t_eval).eval(), a2, gbar.cwiseProduct(t_eval).eval(), da2,
              grad);
    gbar = (h / 6) * lbar + (h / 2) * da2;
    vjp_batch(params, X, (s0 * t_eval).eval(), a1, gbar.cwiseProduct(t_eval).eval(), da1, grad);

    lbar += da1 + da2 + da3 + da4;
  }
  if (b_out) *b_out = lbar;
}

void check_queries(const Eigen::Ref<const Eigen::MatrixXd>& X,
                   const Eigen::Ref<const Eigen::VectorXd>& t_eval) {
  if (X.rows() != t_eval.size()) fail("query covariates/times size mismatch");
  for (Eigen::Index i = 0; i < t_eval.size(); ++i)
    if (!(t_eval[i] >= 0.0)) fail("t_eval must be >= 0");
}

}  // namespace

void ODEConfig::validate() const {
  if (n_steps < 1) fail("ODE n_steps must be >= 1");
  if (!(rtol > 0.0) || !(atol > 0.0)) fail("ODE tolerances must be positive");
  if (max_steps < 1) fail("ODE max_steps must be >= 1");
}

double integrate_rk4(const std::function<double(double, double)>& rhs, double y0, double t0,
                     double t1, int n_steps) {
  const double h = (t1 - t0) / n_steps;
  double y = y0;
  for (int k = 0; k < n_steps; ++k) {
    const double t = t0 + k * h;
    const double k1 = rhs(y, t);
    const double k2 = rhs(y + h / 2 * k1, t + h / 2);
    const double k3 = rhs(y + h / 2 * k2, t + h / 2);
    const double k4 = rhs(y + h * k3, t + h);
    y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!std::isfinite(y)) fail("non-finite state in RK4 integration");
  }
  return y;
}

double integrate_dopri45(const std::function<double(double, double)>& rhs, double y0, double t0,
                         double t1, const ODEConfig& cfg) {
  cfg.validate();
  if (t1 == t0) return y0;
  // Dormand-Prince 5(4) tableau; FSAL.
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                      b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double span = t1 - t0;
  double t = t0, y = y0;
  double h = span / 10.0;
  double k1 = rhs(y, t);
  for (int step = 0; step < cfg.max_steps; ++step) {
    if (t >= t1) return y;
    h = std::min(h, t1 - t);
    const double k2 = rhs(y + h * a21 * k1, t + c2 * h);
    const double k3 = rhs(y + h * (a31 * k1 + a32 * k2), t + c3 * h);
    const double k4 = rhs(y + h * (a41 * k1 + a42 * k2 + a43 * k3), t + c4 * h);
    const double k5 = rhs(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), t + c5 * h);
    const double k6 = rhs(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), t + h);
    const double y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double k7 = rhs(y_new, t + h);
    const double err_raw =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double scale = cfg.atol + cfg.rtol * std::max(std::abs(y), std::abs(y_new));
    const double err = std::abs(err_raw) / scale;
    if (!std::isfinite(y_new)) fail("non-finite state in DOPRI45 integration");
    if (err <= 1.0) {
      t += h;
      y = y_new;
      k1 = k7;  // FSAL
    }
    const double factor = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
    h *= std::min(5.0, std::max(0.2, factor));
  }
  fail("DOPRI45 step-count cap exceeded");
}

double solve_cumhaz(const MLPParams& params, const Eigen::VectorXd& x, double t_eval,
                    const ODEConfig& cfg) {
  cfg.validate();
  if (!(t_eval >= 0.0)) fail("t_eval must be >= 0");
  if (t_eval == 0.0) return 0.0;
  if (cfg.method == OdeMethod::kDopri45) {
    auto rhs = [&](double lam, double t) { return forward(params, lam, t, x); };
    return integrate_dopri45(rhs, 0.0, 0.0, t_eval, cfg);
  }
  Eigen::MatrixXd X = x.transpose();
  Eigen::VectorXd t = Eigen::VectorXd::Constant(1, t_eval);
  return lockstep_forward(params, X, t, cfg.n_steps, nullptr)[0];
}

Eigen::VectorXd batch_solve(const MLPParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                            const Eigen::Ref<const Eigen::VectorXd>& t_eval, const ODEConfig& cfg,
                            int workers) {
  cfg.validate();
  check_queries(X, t_eval);
  const Eigen::Index b = X.rows();
  Eigen::VectorXd out(b);
  const std::size_t n_chunks = (b + kChunkRows - 1) / kChunkRows;
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    const Eigen::Index lo = static_cast<Eigen::Index>(c) * kChunkRows;
    const Eigen::Index len = std::min(kChunkRows, b - lo);
    out.segment(lo, len) = lockstep_forward(params, X.middleRows(lo, len),
                                            t_eval.segment(lo, len), cfg.n_steps, nullptr);
  });
  return out;
}

Eigen::VectorXd batch_solve_store(const MLPParams& params,
                                  const Eigen::Ref<const Eigen::MatrixXd>& X,
                                  const Eigen::Ref<const Eigen::VectorXd>& t_eval,
                                  const ODEConfig& cfg, BatchTrajectory& traj) {
  cfg.validate();
  check_queries(X, t_eval);
  return lockstep_forward(params, X, t_eval, cfg.n_steps, &traj);
}

void batch_adjoint(const MLPParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                   const Eigen::Ref<const Eigen::VectorXd>& t_eval, const ODEConfig& cfg,
                   const BatchTrajectory& traj, const Eigen::Ref<const Eigen::VectorXd>& weights,
                   MLPParams& grad, Eigen::VectorXd* b_out) {
  cfg.validate();
  check_queries(X, t_eval);
  if (traj.stages.rows() != X.rows() || traj.n_steps != cfg.n_steps)
    fail("trajectory does not match queries");
  lockstep_backward(params, X, t_eval, traj, weights, grad, b_out);
}

AdjointState solve_adjoint(const MLPParams& params, const Eigen::VectorXd& x, double t_i,
                           const ODEConfig& cfg) {
  cfg.validate();
  if (!(t_i > 0.0)) fail("solve_adjoint needs t_i > 0");
  Eigen::MatrixXd X = x.transpose();
  Eigen::VectorXd t = Eigen::VectorXd::Constant(1, t_i);
  BatchTrajectory traj;
  const Eigen::VectorXd lam = batch_solve_store(params, X, t, cfg, traj);
  MLPParams grad = MLPParams::zeros(params.shape);
  Eigen::VectorXd b0;
  batch_adjoint(params, X, t, cfg, traj, Eigen::VectorXd::Ones(1), grad, &b0);
  AdjointState state;
  state.lambda_cum = lam[0];
  state.b = b0[0];
  state.grad = grad.flatten();
  return state;
}

}  // namespace icoden
