#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace icoden {

// Feedforward hazard network f(lambda, t, x): input row is [t, lambda, x_1..x_p],
// hidden layers are ReLU, the scalar output passes through Softplus so the
// hazard stays positive.
struct NetworkShape {
  int covariate_count = 0;
  std::vector<int> hidden;

  int input_width() const { return covariate_count + 2; }
  void validate() const;
};

// All weights and biases. Flatten layout is fixed: for each layer, the weight
// matrix in row-major order (one output unit's incoming weights contiguous),
// then its bias vector. flatten/unflatten round-trip bitwise.
struct MLPParams {
  NetworkShape shape;
  std::vector<Eigen::MatrixXd> weights;  // (out x in) per layer
  std::vector<Eigen::VectorXd> biases;

  std::size_t size() const;
  Eigen::VectorXd flatten() const;
  static MLPParams unflatten(const NetworkShape& shape, const Eigen::VectorXd& theta);
  static MLPParams zeros(const NetworkShape& shape);
};

// Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) weights, zero biases.
MLPParams init_params(const NetworkShape& shape, std::uint64_t seed);

double softplus(double z);
double softplus_derivative(double z);  // the logistic function

double forward(const MLPParams& params, double lambda_cum, double t,
               const Eigen::VectorXd& x);

struct VjpResult {
  double d_lambda = 0.0;
  Eigen::VectorXd d_theta;
};

// Exact reverse-mode products: cotangent * df/dlambda and cotangent * df/dtheta.
// ReLU uses subgradient 0 at exactly 0.
VjpResult vjp(const MLPParams& params, double lambda_cum, double t,
              const Eigen::VectorXd& x, double cotangent);

double l1_penalty(const MLPParams& params);
Eigen::VectorXd l1_subgradient(const MLPParams& params);

// Preallocated activation buffers so the ODE stepping loops do not allocate
// per stage; resized on demand to the current batch height.
struct NetWorkspace {
  Eigen::MatrixXd in;
  std::vector<Eigen::MatrixXd> acts;
  std::vector<Eigen::MatrixXd> deltas;
  Eigen::VectorXd z_out;
  Eigen::VectorXd delta_out;
};

// Batched evaluation over query rows; X is (B x p), t and lambda are length B.
// These back the lockstep ODE solves.
void forward_batch(const MLPParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                   const Eigen::Ref<const Eigen::VectorXd>& t,
                   const Eigen::Ref<const Eigen::VectorXd>& lambda, Eigen::VectorXd& out,
                   NetWorkspace* ws = nullptr);

// Batched VJP with one cotangent per row. d_lambda receives the per-row
// lambda-input derivative; layer gradients accumulate into grad (+=).
void vjp_batch(const MLPParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
               const Eigen::Ref<const Eigen::VectorXd>& t,
               const Eigen::Ref<const Eigen::VectorXd>& lambda,
               const Eigen::Ref<const Eigen::VectorXd>& cotangent, Eigen::VectorXd& d_lambda,
               MLPParams& grad, NetWorkspace* ws = nullptr);

// Model JSON document: shape, originating seed, flat parameter vector.
void save_model(const std::string& path, const MLPParams& params, std::uint64_t seed);
MLPParams load_model(const std::string& path, std::uint64_t* seed_out = nullptr);

}  // namespace icoden
