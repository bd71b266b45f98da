#include "icoden/likelihood.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "icoden/parallel.hpp"

namespace icoden {

namespace {

constexpr Eigen::Index kChunkRows = 256;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

// Per-subject slots into the flattened query list; -1 when the time is 0 or
// +inf (no solve needed) or when it duplicates an earlier endpoint of the
// same subject.
struct QuerySlots {
  int v = -1;
  int l = -1;
  int r = -1;
};

struct QueryPlan {
  Eigen::MatrixXd X;
  Eigen::VectorXd t;
  std::vector<QuerySlots> slots;
};

QueryPlan plan_queries(const Dataset& d) {
  QueryPlan plan;
  plan.slots.resize(d.size());
  std::vector<double> times;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Subject& s = d.subjects[i];
    QuerySlots& q = plan.slots[i];
    auto add = [&](double t) {
      times.push_back(t);
      owner.push_back(i);
      return static_cast<int>(times.size()) - 1;
    };
    if (s.v > 0.0) q.v = add(s.v);
    if (s.l > 0.0) q.l = (s.l == s.v) ? q.v : add(s.l);
    if (std::isfinite(s.r)) q.r = (s.r == s.l) ? q.l : (s.r == s.v ? q.v : add(s.r));
  }
  plan.X.resize(times.size(), d.p());
  plan.t.resize(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    plan.X.row(k) = d.subjects[owner[k]].x.transpose();
    plan.t[k] = times[k];
  }
  return plan;
}

SubjectLikTerms terms_for(const Subject& s, const QuerySlots& q, const Eigen::VectorXd& lambdas) {
  SubjectLikTerms t;
  t.lambda_v = q.v >= 0 ? lambdas[q.v] : 0.0;
  t.lambda_l = q.l >= 0 ? lambdas[q.l] : 0.0;
  t.lambda_r = s.right_censored() ? kInf : (q.r >= 0 ? lambdas[q.r] : 0.0);
  return t;
}

}  // namespace

double subject_loglik(const SubjectLikTerms& terms) {
  if (!(terms.lambda_v >= 0.0) || !(terms.lambda_l >= terms.lambda_v))
    fail("likelihood terms must satisfy 0 <= lambda_v <= lambda_l (lambda_v=" +
         format_double(terms.lambda_v) + ", lambda_l=" + format_double(terms.lambda_l) + ")");
  if (!std::isfinite(terms.lambda_r)) return -terms.lambda_l + terms.lambda_v;
  const double delta = terms.lambda_r - terms.lambda_l;
  if (delta < 0.0)
    fail("lambda_r < lambda_l: cumulative-hazard monotonicity violated upstream (lambda_l=" +
         format_double(terms.lambda_l) + ", lambda_r=" + format_double(terms.lambda_r) + ")");
  // log(-expm1(-delta)), expanded below 1e-12 where the leading term is delta.
  const double log_term = delta < 1e-12 ? std::log(delta) + std::log1p(-delta / 2)
                                        : std::log(-std::expm1(-delta));
  return -terms.lambda_l + log_term + terms.lambda_v;
}

DatasetLoss dataset_loss(const MLPParams& params, const Dataset& d, double alpha,
                         const ODEConfig& cfg, int workers) {
  d.validate();
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  const QueryPlan plan = plan_queries(d);
  const Eigen::VectorXd lambdas = batch_solve(params, plan.X, plan.t, cfg, workers);
  DatasetLoss out;
  for (std::size_t i = 0; i < d.size(); ++i)
    out.negloglik -= subject_loglik(terms_for(d.subjects[i], plan.slots[i], lambdas));
  out.loss = out.negloglik + alpha * l1_penalty(params);
  return out;
}

DatasetLoss dataset_loss_grad(const MLPParams& params, const Dataset& d, double alpha,
                              const ODEConfig& cfg, int workers) {
  d.validate();
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  const QueryPlan plan = plan_queries(d);
  const Eigen::Index n_queries = plan.t.size();

  // Forward with stored stages, chunked so the backward pass can reuse them.
  const std::size_t n_chunks = (n_queries + kChunkRows - 1) / kChunkRows;
  std::vector<BatchTrajectory> trajs(n_chunks);
  Eigen::VectorXd lambdas(n_queries);
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    const Eigen::Index lo = static_cast<Eigen::Index>(c) * kChunkRows;
    const Eigen::Index len = std::min(kChunkRows, n_queries - lo);
    lambdas.segment(lo, len) = batch_solve_store(params, plan.X.middleRows(lo, len),
                                                 plan.t.segment(lo, len), cfg, trajs[c]);
  });

  // Loss and the per-query weights of the negative-log-likelihood gradient:
  //   w_L = e^{-L(l)} / (e^{-L(l)} - e^{-L(r)}),  w_R = 1 - w_L,  w_V = -1.
  DatasetLoss out;
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(n_queries);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Subject& s = d.subjects[i];
    const QuerySlots& q = plan.slots[i];
    const SubjectLikTerms terms = terms_for(s, q, lambdas);
    out.negloglik -= subject_loglik(terms);
    if (q.v >= 0) weights[q.v] += -1.0;
    if (std::isfinite(terms.lambda_r)) {
      const double delta = terms.lambda_r - terms.lambda_l;
      const double denom = std::exp(-terms.lambda_l) * (-std::expm1(-delta));
      if (!(denom >= 1e-300))
        fail("degenerate likelihood denominator at subject " + std::to_string(i));
      const double w_l = 1.0 / (-std::expm1(-delta));
      if (q.l >= 0) weights[q.l] += w_l;
      if (q.r >= 0) weights[q.r] += 1.0 - w_l;
    } else if (q.l >= 0) {
      weights[q.l] += 1.0;
    }
  }
  out.loss = out.negloglik + alpha * l1_penalty(params);

  // One weighted backward pass per chunk, reduced in chunk order.
  std::vector<MLPParams> chunk_grads(n_chunks);
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    const Eigen::Index lo = static_cast<Eigen::Index>(c) * kChunkRows;
    const Eigen::Index len = std::min(kChunkRows, n_queries - lo);
    chunk_grads[c] = MLPParams::zeros(params.shape);
    batch_adjoint(params, plan.X.middleRows(lo, len), plan.t.segment(lo, len), cfg, trajs[c],
                  weights.segment(lo, len), chunk_grads[c]);
  });
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  for (std::size_t c = 0; c < n_chunks; ++c) grad += chunk_grads[c].flatten();
  if (alpha > 0.0) grad += alpha * l1_subgradient(params);
  out.grad = std::move(grad);
  return out;
}

}  // namespace icoden
