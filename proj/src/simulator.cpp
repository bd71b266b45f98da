#include "icoden/simulator.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "icoden/rng.hpp"

namespace icoden {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

// Substream phases per subject keep draw counts independent across stages.
enum Phase : std::uint64_t { kCovariates = 1, kEvent = 2, kVisits = 3, kBeta = 4 };

CounterRng subject_rng(std::uint64_t seed, std::uint64_t subject, Phase phase) {
  return CounterRng(seed, (subject + 1) * 8 + static_cast<std::uint64_t>(phase));
}

// Visit times are cumulative Exp(rate) gaps; the observed interval is the gap
// containing t_true, or (last visit, +inf) when the event is never seen.
void censor_at_visits(double t_true, const std::vector<double>& visits, Subject* s) {
  double prev = 0.0;
  for (double visit : visits) {
    if (t_true <= visit) {
      s->l = prev;
      s->r = visit;
      return;
    }
    prev = visit;
  }
  s->l = prev;
  s->r = kInf;
}

std::vector<double> draw_visits(CounterRng& rng, int count, double rate) {
  std::vector<double> visits(count);
  double cursor = 0.0;
  for (int j = 0; j < count; ++j) {
    cursor += rng.exponential(rate);
    visits[j] = cursor;
  }
  return visits;
}

Eigen::MatrixXd ar1_covariance(int p) {
  Eigen::MatrixXd sigma(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) sigma(i, j) = std::exp(-std::abs(i - j));
  return sigma;
}

}  // namespace

double invert_survival(double u, double k, double eta) {
  return std::pow(-std::log(u) / (0.01 * std::exp(eta)), 1.0 / k);
}

double TruthRecord::cumulative_hazard(double t) const {
  return 0.01 * std::exp(eta) * std::pow(t, k);
}

double TruthRecord::survival(double t) const { return std::exp(-cumulative_hazard(t)); }

SimulatedData gen_simple(const SimpleConfig& cfg) {
  if (cfg.n < 1) fail("gen_simple: n must be >= 1");
  if (!(cfg.visit_rate > 0.0) || cfg.n_visits < 1) fail("gen_simple: bad visit config");

  SimulatedData out;
  out.data.schema.p = 1;
  out.data.schema.names = {"x1"};
  out.data.schema.kinds = {CovariateSchema::Kind::kBinary};
  const double eta = std::log(200.0);  // 0.01 * e^eta = 2

  for (int i = 0; i < cfg.n; ++i) {
    auto cov_rng = subject_rng(cfg.seed, i, kCovariates);
    auto event_rng = subject_rng(cfg.seed, i, kEvent);
    auto visit_rng = subject_rng(cfg.seed, i, kVisits);

    Subject s;
    s.x = Eigen::VectorXd::Constant(1, cov_rng.bernoulli(0.5) ? 1.0 : 0.0);
    TruthRecord truth;
    truth.k = s.x[0] == 1.0 ? 2.0 : 1.0;
    truth.eta = eta;
    truth.t_true = invert_survival(event_rng.uniform(), truth.k, truth.eta);

    censor_at_visits(truth.t_true, draw_visits(visit_rng, cfg.n_visits, cfg.visit_rate), &s);
    out.data.subjects.push_back(std::move(s));
    out.truth.push_back(truth);
  }
  out.data.validate();
  return out;
}

void ScenarioConfig::validate() const {
  if (scenario < 1 || scenario > 4) fail("scenario must be 1..4");
  if (n < 1) fail("n must be >= 1");
  if (p < 1) fail("p must be >= 1");
  if ((scenario == 2 || scenario == 4) && p < 5)
    fail("scenarios 2 and 4 need p >= 5 (X1..X4 and a binary covariate)");
  if ((scenario == 3 || scenario == 4) && p / 5 < 1)
    fail("scenarios 3 and 4 need at least one binary covariate (p >= 5)");
  if (!(visit_rate > 0.0) || !(mean_visits > 0.0)) fail("bad visit configuration");
}

std::pair<Eigen::MatrixXd, CovariateSchema> gen_covariates(int n, int p, std::uint64_t seed) {
  if (n < 1 || p < 1) fail("gen_covariates: n and p must be >= 1");
  const Eigen::MatrixXd sigma = ar1_covariance(p);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) fail("gen_covariates: covariance factorization failed");
  const Eigen::MatrixXd chol = llt.matrixL();

  // 20% continuous, 20% binary (floor each), remainder multinomial.
  const int n_cont = p / 5;
  const int n_bin = p / 5;
  CovariateSchema schema = CovariateSchema::continuous(p);
  for (int j = 0; j < p; ++j) {
    if (j < n_cont) continue;
    schema.kinds[j] = j < n_cont + n_bin ? CovariateSchema::Kind::kBinary
                                         : CovariateSchema::Kind::kMultinomial;
  }

  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd z(p);
  for (int i = 0; i < n; ++i) {
    auto rng = subject_rng(seed, i, kCovariates);
    for (int j = 0; j < p; ++j) z[j] = rng.normal();
    Eigen::VectorXd row = chol * z;
    for (int j = 0; j < p; ++j) {
      switch (schema.kinds[j]) {
        case CovariateSchema::Kind::kContinuous:
          break;
        case CovariateSchema::Kind::kBinary:
          row[j] = row[j] > 0.0 ? 1.0 : 0.0;
          break;
        case CovariateSchema::Kind::kMultinomial:
          row[j] = (row[j] > -0.5 ? 1.0 : 0.0) + (row[j] > 0.5 ? 1.0 : 0.0);
          break;
      }
    }
    X.row(i) = row.transpose();
  }
  return {X, schema};
}

Eigen::VectorXd scenario_coefficients(int p, const CovariateSchema& schema,
                                      std::uint64_t beta_seed) {
  // Draw the full MVN(0.2, 0.01*Sigma) vector once, then overwrite the
  // continuous/binary entries with the fixed 0.2.
  const Eigen::MatrixXd sigma = ar1_covariance(p);
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
  CounterRng rng(beta_seed, kBeta);
  Eigen::VectorXd z(p);
  for (int j = 0; j < p; ++j) z[j] = rng.normal();
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(p, 0.2) + 0.1 * (chol * z);
  for (int j = 0; j < p; ++j)
    if (schema.kinds[j] != CovariateSchema::Kind::kMultinomial) beta[j] = 0.2;
  return beta;
}

SimulatedData gen_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  auto [X, schema] = gen_covariates(cfg.n, cfg.p, cfg.seed);
  const Eigen::VectorXd beta = scenario_coefficients(cfg.p, schema, cfg.beta_seed);
  const bool nonlinear = cfg.scenario == 2 || cfg.scenario == 4;
  const bool non_ph = cfg.scenario == 3 || cfg.scenario == 4;
  const int first_binary = cfg.p / 5;  // columns are [continuous | binary | multinomial]

  SimulatedData out;
  out.data.schema = schema;
  for (int i = 0; i < cfg.n; ++i) {
    auto event_rng = subject_rng(cfg.seed, i, kEvent);
    auto visit_rng = subject_rng(cfg.seed, i, kVisits);

    Subject s;
    s.x = X.row(i).transpose();
    double eta = beta.dot(s.x);
    if (nonlinear) eta += s.x[0] * s.x[0] + s.x[1] * s.x[1] + s.x[2] * s.x[3];

    TruthRecord truth;
    truth.eta = eta;
    truth.k = (non_ph && s.x[first_binary] == 1.0) ? 5.0 : 10.0;
    truth.t_true = invert_survival(event_rng.uniform(), truth.k, truth.eta);

    int visits = 0;
    do {
      visits = visit_rng.poisson(cfg.mean_visits);
    } while (visits < 1);
    censor_at_visits(truth.t_true, draw_visits(visit_rng, visits, cfg.visit_rate), &s);

    out.data.subjects.push_back(std::move(s));
    out.truth.push_back(truth);
  }
  out.data.validate();
  return out;
}

void write_truth(const std::string& path, const std::vector<TruthRecord>& truth) {
  std::ofstream out(path);
  if (!out) fail("cannot write truth file: " + path);
  out << "t_true,law,k,eta\n";
  for (const TruthRecord& r : truth)
    out << format_double(r.t_true) << ",weibull," << format_double(r.k) << ','
        << format_double(r.eta) << '\n';
}

std::vector<TruthRecord> load_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open truth file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "t_true,law,k,eta")
    fail("truth file must start with header t_true,law,k,eta");
  std::vector<TruthRecord> truth;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t_str, law, k_str, eta_str;
    if (!std::getline(ss, t_str, ',') || !std::getline(ss, law, ',') ||
        !std::getline(ss, k_str, ',') || !std::getline(ss, eta_str, ','))
      fail("truth row " + std::to_string(row) + ": expected 4 fields");
    if (law != "weibull") fail("truth row " + std::to_string(row) + ": unknown law " + law);
    TruthRecord r;
    try {
      r.t_true = std::stod(t_str);
      r.k = std::stod(k_str);
      r.eta = std::stod(eta_str);
    } catch (const std::exception&) {
      fail("truth row " + std::to_string(row) + ": non-numeric field");
    }
    truth.push_back(r);
  }
  return truth;
}

}  // namespace icoden
