#include "icoden/subgroup.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace icoden {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

constexpr double kVarianceFloor = 1e-8;

double gauss_log_density(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

}  // namespace

double TurnbullFit::lower_at(double t) const {
  double mass = 0.0;
  for (Eigen::Index j = 0; j < masses.size(); ++j)
    if (intervals[j].q < t) mass += masses[j];
  return 1.0 - mass;
}

double TurnbullFit::upper_at(double t) const {
  double mass = 0.0;
  for (Eigen::Index j = 0; j < masses.size(); ++j)
    if (intervals[j].p <= t) mass += masses[j];
  return 1.0 - mass;
}

TurnbullFit turnbull(const Dataset& d, double tol, int max_iter) {
  d.validate();
  for (const Subject& s : d.subjects)
    if (s.v != 0.0) fail("turnbull: left-truncated data unsupported (V must be 0)");

  // Support intervals (q, p]: q from the L set, p from the R set, with no
  // other endpoint strictly inside. Equivalently, q is an L immediately
  // followed by an R in the merged endpoint order.
  std::set<double> endpoint_values;
  std::set<double> left_values, right_values;
  for (const Subject& s : d.subjects) {
    endpoint_values.insert(s.l);
    left_values.insert(s.l);
    endpoint_values.insert(s.r);  // +inf sorts last
    right_values.insert(s.r);
  }
  const std::vector<double> sorted(endpoint_values.begin(), endpoint_values.end());
  TurnbullFit fit;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    if (left_values.count(sorted[i]) && right_values.count(sorted[i + 1]))
      fit.intervals.push_back({sorted[i], sorted[i + 1]});
  }
  if (fit.intervals.empty()) fail("turnbull: no support interval (degenerate data)");

  const std::size_t n = d.size();
  const std::size_t m = fit.intervals.size();
  // contains(i,j): support interval j lies inside subject i's interval.
  Eigen::MatrixXd contains(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      contains(i, j) = (fit.intervals[j].q >= d.subjects[i].l &&
                        fit.intervals[j].p <= d.subjects[i].r)
                           ? 1.0
                           : 0.0;

  Eigen::VectorXd mass = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  for (int iter = 1; iter <= max_iter; ++iter) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double denom = contains.row(i).dot(mass);
      if (!(denom > 0.0)) fail("turnbull: subject covers no support interval");
      next += (contains.row(i).transpose().cwiseProduct(mass)) / denom;
    }
    next /= static_cast<double>(n);
    fit.max_delta = (next - mass).cwiseAbs().maxCoeff();
    mass = next;
    fit.iterations = iter;
    if (fit.max_delta < tol) break;
  }
  fit.masses = mass;

  std::set<double> finite_endpoints;
  for (const Subject& s : d.subjects) {
    finite_endpoints.insert(s.l);
    if (std::isfinite(s.r)) finite_endpoints.insert(s.r);
  }
  fit.band_times.resize(finite_endpoints.size());
  fit.lower.resize(finite_endpoints.size());
  fit.upper.resize(finite_endpoints.size());
  Eigen::Index k = 0;
  for (double t : finite_endpoints) {
    fit.band_times[k] = t;
    fit.lower[k] = fit.lower_at(t);
    fit.upper[k] = fit.upper_at(t);
    ++k;
  }
  return fit;
}

GMMFit gmm_fit(const std::vector<double>& values, int k, std::uint64_t seed) {
  (void)seed;  // initialization is quantile-based, so the fit is already deterministic
  if (k < 1) fail("gmm_fit: k must be >= 1");
  const std::size_t n = values.size();
  std::set<double> distinct(values.begin(), values.end());
  if (static_cast<int>(distinct.size()) < k)
    fail("gmm_fit: fewer distinct values than components");

  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  double mean_all = 0.0;
  for (double v : values) mean_all += v;
  mean_all /= static_cast<double>(n);
  double var_all = 0.0;
  for (double v : values) var_all += (v - mean_all) * (v - mean_all);
  var_all = std::max(var_all / static_cast<double>(n), kVarianceFloor);

  GMMFit fit;
  fit.k = k;
  fit.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  fit.means.resize(k);
  for (int c = 0; c < k; ++c) {
    const double quantile = (c + 0.5) / k;
    fit.means[c] = sorted[static_cast<std::size_t>(quantile * (n - 1))];
  }
  fit.variances = Eigen::VectorXd::Constant(k, var_all);
  fit.responsibilities.resize(n, k);

  double prev_loglik = -kInf;
  for (int iter = 0; iter < 500; ++iter) {
    // E step with the usual log-sum-exp guard.
    double loglik = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd logp(k);
      for (int c = 0; c < k; ++c)
        logp[c] = std::log(fit.weights[c]) + gauss_log_density(values[i], fit.means[c],
                                                               fit.variances[c]);
      const double mx = logp.maxCoeff();
      const double lse = mx + std::log((logp.array() - mx).exp().sum());
      loglik += lse;
      fit.responsibilities.row(i) = (logp.array() - lse).exp();
    }
    fit.loglik_trace.push_back(loglik);

    // M step.
    for (int c = 0; c < k; ++c) {
      const double resp_sum = fit.responsibilities.col(c).sum();
      fit.weights[c] = resp_sum / static_cast<double>(n);
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) mu += fit.responsibilities(i, c) * values[i];
      mu = resp_sum > 0.0 ? mu / resp_sum : fit.means[c];
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        var += fit.responsibilities(i, c) * (values[i] - mu) * (values[i] - mu);
      var = resp_sum > 0.0 ? var / resp_sum : kVarianceFloor;
      fit.means[c] = mu;
      fit.variances[c] = std::max(var, kVarianceFloor);
    }

    if (iter > 0 && loglik - prev_loglik < 1e-9) break;
    prev_loglik = loglik;
  }

  fit.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index best;
    fit.responsibilities.row(i).maxCoeff(&best);
    fit.labels[i] = static_cast<int>(best);
  }
  return fit;
}

SubgroupResult identify_subgroups(const MLPParams& params, const Dataset& d, double t_star, int k,
                                  std::uint64_t seed, const ODEConfig& ode, int workers) {
  d.validate();
  if (!(t_star > 0.0)) fail("identify_subgroups: t_star must be > 0");
  if (k < 0 || k > 4) fail("identify_subgroups: k must be 1..4, or 0 for BIC selection");

  const Eigen::VectorXd lambdas =
      batch_solve(params, d.covariate_matrix(),
                  Eigen::VectorXd::Constant(d.size(), t_star), ode, workers);
  SubgroupResult result;
  result.log_cumhaz.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    result.log_cumhaz[i] = lambdas[i] < 1e-300 ? -700.0 : std::log(lambdas[i]);

  if (k >= 1) {
    result.gmm = gmm_fit(result.log_cumhaz, k, seed);
  } else {
    double best_bic = kInf;
    std::set<double> distinct(result.log_cumhaz.begin(), result.log_cumhaz.end());
    for (int kk = 1; kk <= 4; ++kk) {
      if (static_cast<int>(distinct.size()) < kk) break;
      GMMFit candidate = gmm_fit(result.log_cumhaz, kk, seed);
      const double n_params = 3.0 * kk - 1.0;
      const double bic = -2.0 * candidate.loglik_trace.back() +
                         n_params * std::log(static_cast<double>(d.size()));
      if (bic < best_bic) {
        best_bic = bic;
        result.gmm = std::move(candidate);
      }
    }
  }
  result.labels = result.gmm.labels;
  return result;
}

}  // namespace icoden
