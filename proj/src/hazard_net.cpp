#include "icoden/hazard_net.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "icoden/core_data.hpp"
#include "icoden/rng.hpp"

namespace icoden {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

std::vector<int> layer_widths(const NetworkShape& shape) {
  std::vector<int> widths;
  widths.push_back(shape.input_width());
  for (int h : shape.hidden) widths.push_back(h);
  widths.push_back(1);
  return widths;
}

// Input rows are [t, lambda, x].
void assemble_inputs(const Eigen::Ref<const Eigen::MatrixXd>& X,
                     const Eigen::Ref<const Eigen::VectorXd>& t,
                     const Eigen::Ref<const Eigen::VectorXd>& lambda, Eigen::MatrixXd& in) {
  const Eigen::Index b = X.rows();
  if (t.size() != b || lambda.size() != b) fail("batch size mismatch in net inputs");
  in.resize(b, X.cols() + 2);
  in.col(0) = t;
  in.col(1) = lambda;
  in.rightCols(X.cols()) = X;
}

void ensure_workspace(NetWorkspace& ws, const MLPParams& params, Eigen::Index b) {
  const std::size_t n_hidden = params.weights.size() - 1;
  ws.acts.resize(n_hidden);
  ws.deltas.resize(n_hidden);
  for (std::size_t l = 0; l < n_hidden; ++l) {
    ws.acts[l].resize(b, params.weights[l].rows());
    ws.deltas[l].resize(b, params.weights[l].rows());
  }
  ws.z_out.resize(b);
  ws.delta_out.resize(b);
}

}  // namespace

void NetworkShape::validate() const {
  if (covariate_count < 1) fail("network needs covariate_count >= 1");
  if (hidden.empty()) fail("network needs at least one hidden layer");
  for (int h : hidden)
    if (h < 1) fail("hidden widths must be >= 1");
}

std::size_t MLPParams::size() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
  return n;
}

Eigen::VectorXd MLPParams::flatten() const {
  Eigen::VectorXd theta(size());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& w = weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) theta[k++] = w(i, j);
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) theta[k++] = biases[l][i];
  }
  return theta;
}

MLPParams MLPParams::unflatten(const NetworkShape& shape, const Eigen::VectorXd& theta) {
  MLPParams p = zeros(shape);
  if (static_cast<std::size_t>(theta.size()) != p.size())
    fail("parameter vector length does not match shape");
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = theta[k++];
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) p.biases[l][i] = theta[k++];
  }
  return p;
}

MLPParams MLPParams::zeros(const NetworkShape& shape) {
  shape.validate();
  MLPParams p;
  p.shape = shape;
  const auto widths = layer_widths(shape);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    p.weights.emplace_back(Eigen::MatrixXd::Zero(widths[l + 1], widths[l]));
    p.biases.emplace_back(Eigen::VectorXd::Zero(widths[l + 1]));
  }
  return p;
}

MLPParams init_params(const NetworkShape& shape, std::uint64_t seed) {
  MLPParams p = MLPParams::zeros(shape);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    CounterRng rng(seed, /*stream=*/l + 1);
    auto& w = p.weights[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
  }
  return p;
}

double softplus(double z) {
  // max(z,0) + log1p(exp(-|z|)): no overflow and monotone through z=0.
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double softplus_derivative(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void forward_batch(const MLPParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                   const Eigen::Ref<const Eigen::VectorXd>& t,
                   const Eigen::Ref<const Eigen::VectorXd>& lambda, Eigen::VectorXd& out,
                   NetWorkspace* ws) {
  if (X.cols() != params.shape.covariate_count) fail("covariate width mismatch");
  NetWorkspace local;
  if (!ws) ws = &local;
  ensure_workspace(*ws, params, X.rows());
  assemble_inputs(X, t, lambda, ws->in);

  const std::size_t n_hidden = params.weights.size() - 1;
  const Eigen::MatrixXd* below = &ws->in;
  for (std::size_t l = 0; l < n_hidden; ++l) {
    ws->acts[l].noalias() = *below * params.weights[l].transpose();
    ws->acts[l] = (ws->acts[l].rowwise() + params.biases[l].transpose()).cwiseMax(0.0);
    below = &ws->acts[l];
  }
  ws->z_out.noalias() = *below * params.weights.back().transpose().col(0);
  ws->z_out.array() += params.biases.back()[0];
  out.resize(ws->z_out.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = softplus(ws->z_out[i]);
}

void vjp_batch(const MLPParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
               const Eigen::Ref<const Eigen::VectorXd>& t,
               const Eigen::Ref<const Eigen::VectorXd>& lambda,
               const Eigen::Ref<const Eigen::VectorXd>& cotangent, Eigen::VectorXd& d_lambda,
               MLPParams& grad, NetWorkspace* ws) {
  if (X.cols() != params.shape.covariate_count) fail("covariate width mismatch");
  NetWorkspace local;
  if (!ws) ws = &local;
  ensure_workspace(*ws, params, X.rows());
  assemble_inputs(X, t, lambda, ws->in);

  const std::size_t n_hidden = params.weights.size() - 1;
  const Eigen::MatrixXd* below = &ws->in;
  for (std::size_t l = 0; l < n_hidden; ++l) {
    ws->acts[l].noalias() = *below * params.weights[l].transpose();
    ws->acts[l] = (ws->acts[l].rowwise() + params.biases[l].transpose()).cwiseMax(0.0);
    below = &ws->acts[l];
  }
  ws->z_out.noalias() = *below * params.weights.back().transpose().col(0);
  ws->z_out.array() += params.biases.back()[0];

  // Output layer: delta = cotangent * softplus'(z).
  for (Eigen::Index i = 0; i < ws->z_out.size(); ++i)
    ws->delta_out[i] = cotangent[i] * softplus_derivative(ws->z_out[i]);

  grad.weights.back().row(0).noalias() += ws->delta_out.transpose() * *below;
  grad.biases.back()[0] += ws->delta_out.sum();

  // Walk hidden layers backwards; ReLU' is 1 on strictly positive activations.
  ws->deltas[n_hidden - 1].noalias() = ws->delta_out * params.weights.back().row(0);
  for (std::size_t l = n_hidden; l-- > 0;) {
    ws->deltas[l] = ws->deltas[l].cwiseProduct((ws->acts[l].array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd& input = l > 0 ? ws->acts[l - 1] : ws->in;
    grad.weights[l].noalias() += ws->deltas[l].transpose() * input;
    grad.biases[l].noalias() += ws->deltas[l].colwise().sum().transpose();
    if (l > 0) ws->deltas[l - 1].noalias() = ws->deltas[l] * params.weights[l];
    else d_lambda = ws->deltas[0] * params.weights[0].col(1);
  }
}

double forward(const MLPParams& params, double lambda_cum, double t, const Eigen::VectorXd& x) {
  Eigen::MatrixXd X = x.transpose();
  Eigen::VectorXd tv = Eigen::VectorXd::Constant(1, t);
  Eigen::VectorXd lv = Eigen::VectorXd::Constant(1, lambda_cum);
  Eigen::VectorXd out;
  forward_batch(params, X, tv, lv, out);
  return out[0];
}

VjpResult vjp(const MLPParams& params, double lambda_cum, double t, const Eigen::VectorXd& x,
              double cotangent) {
  Eigen::MatrixXd X = x.transpose();
  Eigen::VectorXd tv = Eigen::VectorXd::Constant(1, t);
  Eigen::VectorXd lv = Eigen::VectorXd::Constant(1, lambda_cum);
  Eigen::VectorXd cot = Eigen::VectorXd::Constant(1, cotangent);
  MLPParams grad = MLPParams::zeros(params.shape);
  Eigen::VectorXd dl;
  vjp_batch(params, X, tv, lv, cot, dl, grad);
  return VjpResult{dl[0], grad.flatten()};
}

double l1_penalty(const MLPParams& params) {
  double total = 0.0;
  for (std::size_t l = 0; l < params.weights.size(); ++l)
    total += params.weights[l].cwiseAbs().sum() + params.biases[l].cwiseAbs().sum();
  return total;
}

Eigen::VectorXd l1_subgradient(const MLPParams& params) {
  Eigen::VectorXd theta = params.flatten();
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    theta[i] = theta[i] > 0.0 ? 1.0 : (theta[i] < 0.0 ? -1.0 : 0.0);
  return theta;
}

void save_model(const std::string& path, const MLPParams& params, std::uint64_t seed) {
  nlohmann::json doc;
  doc["shape"] = {{"p", params.shape.covariate_count}, {"hidden", params.shape.hidden}};
  doc["seed"] = seed;
  const Eigen::VectorXd theta = params.flatten();
  doc["params"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  std::ofstream out(path);
  if (!out) fail("cannot write model file: " + path);
  out << doc.dump(2) << '\n';
}

MLPParams load_model(const std::string& path, std::uint64_t* seed_out) {
  std::ifstream in(path);
  if (!in) fail("cannot open model file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail("malformed model JSON: " + std::string(e.what()));
  }
  NetworkShape shape;
  shape.covariate_count = doc.at("shape").at("p").get<int>();
  shape.hidden = doc.at("shape").at("hidden").get<std::vector<int>>();
  if (seed_out) *seed_out = doc.value("seed", std::uint64_t{0});
  const auto values = doc.at("params").get<std::vector<double>>();
  Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
  return MLPParams::unflatten(shape, theta);
}

}  // namespace icoden
