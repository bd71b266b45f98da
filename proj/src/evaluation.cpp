#include "icoden/evaluation.hpp"

#include <cmath>
#include <stdexcept>

namespace icoden {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

constexpr double kLn2 = 0.6931471805599453;

// Trapezoid weights on a uniform grid of m points spanning [0, span].
double trapezoid(const Eigen::VectorXd& values, double span) {
  const Eigen::Index m = values.size();
  const double h = span / static_cast<double>(m - 1);
  double sum = 0.5 * (values[0] + values[m - 1]);
  for (Eigen::Index i = 1; i + 1 < m; ++i) sum += values[i];
  return sum * h;
}

}  // namespace

void EvaluationConfig::validate() const {
  if (grid_points < 2) fail("grid_points must be >= 2");
}

double ibs_horizon(const Dataset& d) {
  double u = 0.0;
  for (const Subject& s : d.subjects) {
    u = std::max(u, s.l);
    if (std::isfinite(s.r)) u = std::max(u, s.r);
  }
  if (!(u > 0.0)) fail("IBS horizon is zero: no positive finite endpoint observed");
  return u;
}

SurvivalCurve predict_survival(const MLPParams& params, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& times, const ODEConfig& ode, int workers) {
  if (times.size() < 1) fail("prediction grid must be nonempty");
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0)) fail("prediction times must be >= 0");
    if (i > 0 && !(times[i] > times[i - 1])) fail("prediction times must strictly increase");
  }
  const bool prepend = times[0] > 0.0;
  const Eigen::Index m = times.size();
  const Eigen::MatrixXd X = x.transpose().replicate(m, 1);
  const Eigen::VectorXd lambdas = batch_solve(params, X, times, ode, workers);

  SurvivalCurve curve;
  curve.times.resize(m + (prepend ? 1 : 0));
  curve.values.resize(curve.times.size());
  Eigen::Index k = 0;
  if (prepend) {
    curve.times[0] = 0.0;
    curve.values[0] = 1.0;
    k = 1;
  }
  for (Eigen::Index i = 0; i < m; ++i, ++k) {
    curve.times[k] = times[i];
    curve.values[k] = std::exp(-lambdas[i]);
  }
  return curve;
}

double mse_survival(const MLPParams& params, const Dataset& d,
                    const std::vector<TruthRecord>& truth, const EvaluationConfig& cfg,
                    const ODEConfig& ode, int workers) {
  cfg.validate();
  d.validate();
  if (truth.size() != d.size()) fail("truth records must pair with subjects");
  const int m = cfg.grid_points;
  const std::size_t n = d.size();

  // One flat query list: subject i occupies rows [i*m, (i+1)*m). The t=0 grid
  // head would solve trivially, so it is folded in as an exact S=1.
  Eigen::MatrixXd X(n * static_cast<std::size_t>(m), d.p());
  Eigen::VectorXd t(n * static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(truth[i].t_true > 0.0)) fail("mse_survival: t_true must be > 0");
    const double h = truth[i].t_true / (m - 1);
    for (int g = 0; g < m; ++g) {
      X.row(i * m + g) = d.subjects[i].x.transpose();
      t[i * m + g] = g * h;
    }
  }
  const Eigen::VectorXd lambdas = batch_solve(params, X, t, ode, workers);

  double total = 0.0;
  Eigen::VectorXd sq(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (int g = 0; g < m; ++g) {
      const double s_true = truth[i].survival(t[i * m + g]);
      const double s_hat = std::exp(-lambdas[i * m + g]);
      sq[g] = (s_true - s_hat) * (s_true - s_hat);
    }
    total += trapezoid(sq, truth[i].t_true) / truth[i].t_true;
  }
  return total / static_cast<double>(n);
}

double surrogate_indicator(double t, const Subject& subject, const MLPParams& params,
                           const ODEConfig& ode, long* degenerate_counter) {
  if (t <= subject.l) return 1.0;
  if (t > subject.r) return 0.0;
  const double s_l = std::exp(-solve_cumhaz(params, subject.x, subject.l, ode));
  const double s_r =
      subject.right_censored() ? 0.0 : std::exp(-solve_cumhaz(params, subject.x, subject.r, ode));
  const double s_t = std::exp(-solve_cumhaz(params, subject.x, t, ode));
  if (s_l == s_r) {
    if (degenerate_counter) ++*degenerate_counter;
    return 0.5;
  }
  return (s_t - s_r) / (s_l - s_r);
}

double ibs(const MLPParams& params, const Dataset& d, const EvaluationConfig& cfg,
           const ODEConfig& ode, int workers) {
  cfg.validate();
  d.validate();
  const double u = ibs_horizon(d);
  const int m = cfg.grid_points;
  const std::size_t n = d.size();

  // Grid survival per subject plus the two endpoint survivals, one batch.
  Eigen::MatrixXd X(n * static_cast<std::size_t>(m) + 2 * n, d.p());
  Eigen::VectorXd t(X.rows());
  for (std::size_t i = 0; i < n; ++i) {
    const double h = u / (m - 1);
    for (int g = 0; g < m; ++g) {
      X.row(i * m + g) = d.subjects[i].x.transpose();
      t[i * m + g] = g * h;
    }
    X.row(n * m + 2 * i) = d.subjects[i].x.transpose();
    t[n * m + 2 * i] = d.subjects[i].l;
    X.row(n * m + 2 * i + 1) = d.subjects[i].x.transpose();
    t[n * m + 2 * i + 1] = std::isfinite(d.subjects[i].r) ? d.subjects[i].r : 0.0;
  }
  const Eigen::VectorXd lambdas = batch_solve(params, X, t, ode, workers);

  double total = 0.0;
  Eigen::VectorXd sq(m);
  for (std::size_t i = 0; i < n; ++i) {
    const Subject& s = d.subjects[i];
    const double s_l = std::exp(-lambdas[n * m + 2 * i]);
    const double s_r = s.right_censored() ? 0.0 : std::exp(-lambdas[n * m + 2 * i + 1]);
    for (int g = 0; g < m; ++g) {
      const double tg = t[i * m + g];
      const double s_hat = std::exp(-lambdas[i * m + g]);
      double indicator;
      if (tg <= s.l) indicator = 1.0;
      else if (tg > s.r) indicator = 0.0;
      else if (s_l == s_r) indicator = 0.5;
      else indicator = (s_hat - s_r) / (s_l - s_r);
      sq[g] = (indicator - s_hat) * (indicator - s_hat);
    }
    total += trapezoid(sq, u) / u;
  }
  return total / static_cast<double>(n);
}

Eigen::VectorXd predict_medians(const MLPParams& params, const Dataset& d, const ODEConfig& ode,
                                int workers) {
  const std::size_t n = d.size();
  const Eigen::MatrixXd X = d.covariate_matrix();

  // Lockstep bracket doubling: t_max from 1 to 2^10 until Lambda >= ln 2.
  Eigen::VectorXd hi = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(n);
  Eigen::ArrayXd bracketed = Eigen::ArrayXd::Zero(n);
  for (int round = 0; round <= 10; ++round) {
    const Eigen::VectorXd lam = batch_solve(params, X, hi, ode, workers);
    for (std::size_t i = 0; i < n; ++i) {
      if (bracketed[i] == 1.0) continue;
      if (lam[i] >= kLn2) bracketed[i] = 1.0;
      else if (round < 10) {
        lo[i] = hi[i];
        hi[i] *= 2.0;
      }
    }
    if ((bracketed == 1.0).all()) break;
  }

  Eigen::VectorXd mid(n);
  for (int iter = 0; iter < 60; ++iter) {
    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (lo[i] + hi[i]);
    const Eigen::VectorXd lam = batch_solve(params, X, mid, ode, workers);
    for (std::size_t i = 0; i < n; ++i) {
      if (bracketed[i] != 1.0) continue;
      if (lam[i] >= kLn2) hi[i] = mid[i];
      else lo[i] = mid[i];
    }
  }

  Eigen::VectorXd medians(n);
  for (std::size_t i = 0; i < n; ++i)
    medians[i] = bracketed[i] == 1.0 ? 0.5 * (lo[i] + hi[i]) : kInf;
  return medians;
}

MedianPrediction predict_median(const MLPParams& params, const Eigen::VectorXd& x,
                                const ODEConfig& ode) {
  Dataset d;
  d.schema = CovariateSchema::continuous(static_cast<int>(x.size()));
  Subject s;
  s.l = 1.0;  // placeholder interval; only x is used here
  s.x = x;
  d.subjects.push_back(std::move(s));
  return MedianPrediction{predict_medians(params, d, ode)[0]};
}

double p_out(const MLPParams& params, const Dataset& d, const ODEConfig& ode, int workers) {
  d.validate();
  const Eigen::VectorXd medians = predict_medians(params, d, ode, workers);
  std::size_t outside = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Subject& s = d.subjects[i];
    // Set membership in (L, R]; t_hat = +inf lies inside (L, +inf) only.
    const double m = medians[i];
    const bool inside = s.right_censored() ? m > s.l : (m > s.l && m <= s.r);
    if (!inside) ++outside;
  }
  return static_cast<double>(outside) / static_cast<double>(d.size());
}

double d_out(const MLPParams& params, const Dataset& d, const ODEConfig& ode, int workers) {
  d.validate();
  const Eigen::VectorXd medians = predict_medians(params, d, ode, workers);
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Subject& s = d.subjects[i];
    double dist = std::abs(s.l - medians[i]);
    if (std::isfinite(s.r)) dist = std::min(dist, std::abs(s.r - medians[i]));
    total += dist;
  }
  return total / static_cast<double>(d.size());
}

}  // namespace icoden
