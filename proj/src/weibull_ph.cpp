#include "icoden/weibull_ph.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "icoden/likelihood.hpp"

namespace icoden {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

// dLambda/d(log_scale) = Lambda, d/d(log_shape) = Lambda * shape * ln t,
// d/dbeta_j = Lambda * x_j; all zero at t = 0.
void add_cumhaz_partials(const WeibullPHParams& wp, const Eigen::VectorXd& x, double t,
                         double lambda, double coeff, Eigen::VectorXd& grad) {
  if (t <= 0.0 || lambda == 0.0) return;
  grad[0] += coeff * lambda;
  grad[1] += coeff * lambda * wp.shape() * std::log(t);
  grad.tail(x.size()) += (coeff * lambda) * x;
}

}  // namespace

double weibull_cumhaz(const WeibullPHParams& wp, const Eigen::VectorXd& x, double t) {
  if (!(t >= 0.0)) fail("weibull_cumhaz: t must be >= 0");
  if (t == 0.0) return 0.0;
  return wp.scale() * std::pow(t, wp.shape()) * std::exp(wp.beta.dot(x));
}

double weibull_loglik(const WeibullPHParams& wp, const Dataset& d, Eigen::VectorXd* grad) {
  d.validate();
  if (wp.beta.size() != d.p()) fail("weibull_loglik: beta length mismatch");
  if (grad) grad->setZero(2 + d.p());

  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Subject& s = d.subjects[i];
    SubjectLikTerms terms;
    terms.lambda_v = weibull_cumhaz(wp, s.x, s.v);
    terms.lambda_l = weibull_cumhaz(wp, s.x, s.l);
    terms.lambda_r = s.right_censored() ? kInf : weibull_cumhaz(wp, s.x, s.r);
    // Extreme trial parameters can overflow the closed form (0 * inf); treat
    // them as outside the domain so line searches back off.
    if (std::isnan(terms.lambda_v) || std::isnan(terms.lambda_l) ||
        std::isnan(terms.lambda_r) || terms.lambda_r < terms.lambda_l)
      return -kInf;
    total += subject_loglik(terms);
    if (!grad) continue;

    if (s.right_censored()) {
      add_cumhaz_partials(wp, s.x, s.l, terms.lambda_l, -1.0, *grad);
    } else {
      const double delta = terms.lambda_r - terms.lambda_l;
      const double w_l = 1.0 / (-std::expm1(-delta));  // >= 1
      add_cumhaz_partials(wp, s.x, s.l, terms.lambda_l, -w_l, *grad);
      add_cumhaz_partials(wp, s.x, s.r, terms.lambda_r, w_l - 1.0, *grad);
    }
    add_cumhaz_partials(wp, s.x, s.v, terms.lambda_v, 1.0, *grad);
  }
  return total;
}

WeibullPHFit fit_weibull_ph(const Dataset& d, const WeibullFitConfig& cfg) {
  d.validate();
  const int dim = 2 + d.p();

  // Deterministic start: scale from a crude event-time proxy, shape 1, beta 0.
  double proxy = 0.0;
  for (const Subject& s : d.subjects) proxy += s.l + std::min(s.r, 3.0 * s.l);
  proxy /= static_cast<double>(d.size());
  WeibullPHParams wp;
  wp.log_scale = (std::isfinite(proxy) && proxy > 0.0) ? std::log(1.0 / proxy) : 0.0;
  wp.log_shape = 0.0;
  wp.beta = Eigen::VectorXd::Zero(d.p());

  auto pack = [&](const WeibullPHParams& p) {
    Eigen::VectorXd u(dim);
    u[0] = p.log_scale;
    u[1] = p.log_shape;
    u.tail(d.p()) = p.beta;
    return u;
  };
  auto unpack = [&](const Eigen::VectorXd& u) {
    WeibullPHParams p;
    p.log_scale = u[0];
    p.log_shape = u[1];
    p.beta = u.tail(d.p());
    return p;
  };
  // Objective is the negative log-likelihood.
  auto eval = [&](const Eigen::VectorXd& u, Eigen::VectorXd* g) {
    const double ll = weibull_loglik(unpack(u), d, g);
    if (g) *g = -*g;
    return -ll;
  };

  Eigen::VectorXd u = pack(wp);
  Eigen::VectorXd g(dim);
  double value = eval(u, &g);
  if (!std::isfinite(value)) fail("fit_weibull_ph: non-finite likelihood at start");
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(dim, dim);

  WeibullPHFit fit;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    fit.iterations = iter;
    fit.grad_norm = g.cwiseAbs().maxCoeff();
    if (fit.grad_norm < cfg.tol) {
      fit.converged = true;
      break;
    }

    Eigen::VectorXd direction = -(h_inv * g);
    double slope = g.dot(direction);
    if (!(slope < 0.0)) {  // stale curvature; restart from steepest descent
      h_inv.setIdentity();
      direction = -g;
      slope = g.dot(direction);
    }

    double step = 1.0;
    Eigen::VectorXd u_next;
    double value_next = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      u_next = u + step * direction;
      value_next = eval(u_next, nullptr);
      if (std::isfinite(value_next) && value_next <= value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further progress representable

    Eigen::VectorXd g_next(dim);
    eval(u_next, &g_next);
    const Eigen::VectorXd s = u_next - u;
    const Eigen::VectorXd y = g_next - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd outer = Eigen::MatrixXd::Identity(dim, dim) - rho * s * y.transpose();
      h_inv = outer * h_inv * outer.transpose() + rho * s * s.transpose();
    }
    u = u_next;
    g = g_next;
    value = value_next;
  }

  fit.params = unpack(u);
  fit.loglik = -value;
  fit.boundary = fit.params.log_scale < -20.0;
  return fit;
}

SurvivalCurve weibull_predict_survival(const WeibullPHParams& wp, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& times) {
  if (times.size() < 1) fail("prediction grid must be nonempty");
  const bool prepend = times[0] > 0.0;
  SurvivalCurve curve;
  curve.times.resize(times.size() + (prepend ? 1 : 0));
  curve.values.resize(curve.times.size());
  Eigen::Index k = 0;
  if (prepend) {
    curve.times[0] = 0.0;
    curve.values[0] = 1.0;
    k = 1;
  }
  for (Eigen::Index i = 0; i < times.size(); ++i, ++k) {
    curve.times[k] = times[i];
    curve.values[k] = std::exp(-weibull_cumhaz(wp, x, times[i]));
  }
  curve.validate();
  return curve;
}

void save_weibull(const std::string& path, const WeibullPHFit& fit) {
  nlohmann::json doc;
  doc["log_scale"] = fit.params.log_scale;
  doc["log_shape"] = fit.params.log_shape;
  doc["beta"] = std::vector<double>(fit.params.beta.data(),
                                    fit.params.beta.data() + fit.params.beta.size());
  doc["converged"] = fit.converged;
  doc["boundary"] = fit.boundary;
  doc["iterations"] = fit.iterations;
  doc["loglik"] = fit.loglik;
  std::ofstream out(path);
  if (!out) fail("cannot write weibull model: " + path);
  out << doc.dump(2) << '\n';
}

WeibullPHFit load_weibull(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open weibull model: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail("malformed weibull JSON: " + std::string(e.what()));
  }
  WeibullPHFit fit;
  fit.params.log_scale = doc.at("log_scale").get<double>();
  fit.params.log_shape = doc.at("log_shape").get<double>();
  const auto beta = doc.at("beta").get<std::vector<double>>();
  fit.params.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
  fit.converged = doc.value("converged", false);
  fit.boundary = doc.value("boundary", false);
  fit.iterations = doc.value("iterations", 0);
  fit.loglik = doc.value("loglik", 0.0);
  return fit;
}

}  // namespace icoden
