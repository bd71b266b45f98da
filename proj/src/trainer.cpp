#include "icoden/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "icoden/evaluation.hpp"
#include "icoden/rng.hpp"

namespace icoden {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

void optimizer_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, const TrainConfig& cfg,
                    AdamState& adam) {
  if (cfg.optimizer == Optimizer::kSgd) {
    theta -= cfg.learning_rate * grad;
    return;
  }
  ++adam.step;
  adam.m = cfg.adam_beta1 * adam.m + (1.0 - cfg.adam_beta1) * grad;
  adam.v = cfg.adam_beta2 * adam.v + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
  const double mhat_scale = 1.0 / (1.0 - std::pow(cfg.adam_beta1, adam.step));
  const double vhat_scale = 1.0 / (1.0 - std::pow(cfg.adam_beta2, adam.step));
  theta.array() -= cfg.learning_rate * (adam.m.array() * mhat_scale) /
                   ((adam.v.array() * vhat_scale).sqrt() + cfg.adam_eps);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, /*stream=*/0xE70C0 + static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

}  // namespace

void TrainConfig::validate() const {
  if (hidden.empty()) fail("hidden layer list must be nonempty");
  for (int h : hidden)
    if (h < 1) fail("hidden widths must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail("val_fraction must lie in (0,1)");
  if (patience < 1) fail("patience must be >= 1");
  ode.validate();
}

std::pair<MLPParams, TrainReport> train(const Dataset& d, const TrainConfig& cfg,
                                        const TrainHooks& hooks, int workers) {
  cfg.validate();
  d.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const auto parts = split_dataset(d, {1.0 - cfg.val_fraction, cfg.val_fraction}, cfg.seed);
  const Dataset& train_part = parts[0];
  const Dataset& val_part = parts[1];
  if (train_part.subjects.empty() || val_part.subjects.empty())
    fail("train/validation split produced an empty fold");

  const std::size_t n_train = train_part.size();
  const std::size_t batch =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n_train);

  NetworkShape shape{d.p(), cfg.hidden};
  MLPParams params = init_params(shape, cfg.seed);
  Eigen::VectorXd theta = params.flatten();
  AdamState adam{Eigen::VectorXd::Zero(theta.size()), Eigen::VectorXd::Zero(theta.size()), 0};

  TrainReport report;
  Eigen::VectorXd best_theta = theta;
  double best_val = kInf;
  int stall = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(n_train, cfg.seed, epoch);
    double epoch_negloglik = 0.0;
    for (std::size_t lo = 0; lo < n_train; lo += batch) {
      const std::size_t len = std::min(batch, n_train - lo);
      const std::vector<std::size_t> idx(order.begin() + lo, order.begin() + lo + len);
      const Dataset minibatch = train_part.subset(idx);
      const DatasetLoss lg = dataset_loss_grad(params, minibatch, cfg.alpha, cfg.ode, workers);
      if (!std::isfinite(lg.loss))
        fail("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
             std::to_string(lo / batch + 1));
      epoch_negloglik += lg.negloglik;
      optimizer_step(theta, lg.grad, cfg, adam);
      params = MLPParams::unflatten(shape, theta);
    }
    report.train_loss.push_back(epoch_negloglik + cfg.alpha * l1_penalty(params));

    const double val = hooks.val_metric
                           ? hooks.val_metric(params, val_part, epoch)
                           : dataset_loss(params, val_part, 0.0, cfg.ode, workers).negloglik;
    if (!std::isfinite(val))
      fail("non-finite validation loss at epoch " + std::to_string(epoch));
    report.val_loss.push_back(val);

    if (val < best_val) {
      best_val = val;
      best_theta = theta;
      report.best_epoch = epoch;
      stall = 0;
    } else {
      ++stall;
    }
    report.stopped_epoch = epoch;
    if (stall >= cfg.patience) break;
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {MLPParams::unflatten(shape, best_theta), report};
}

void write_train_report(const std::string& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) fail("cannot write train report: " + path);
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < report.train_loss.size(); ++e)
    out << (e + 1) << ',' << format_double(report.train_loss[e]) << ','
        << format_double(report.val_loss[e]) << '\n';
}

namespace {

const std::vector<double> kL1Grid = {1.0, 0.1, 0.01, 0.001, 0.0001};
const std::vector<double> kLrGrid = {0.1, 0.01, 0.001, 0.0001};
const std::vector<int> kBatchGrid = {100, 400};
const std::vector<int> kEpochGrid = {50, 100};

template <typename T>
bool in_set(T value, const std::vector<T>& allowed) {
  return std::find(allowed.begin(), allowed.end(), value) != allowed.end();
}

void validate_grids(const TuneGrids& grids) {
  if (grids.nodes.empty() && grids.learning_rate.empty() && grids.alpha.empty() &&
      grids.batch_size.empty() && grids.epochs.empty())
    fail("tune_oat: all grids are empty");
  for (int n : grids.nodes)
    if (n < 10 || n > 500) fail("tune_oat: nodes grid must stay within 10..500");
  for (double v : grids.learning_rate)
    if (!in_set(v, kLrGrid)) fail("tune_oat: learning-rate value outside the tuning grid");
  for (double v : grids.alpha)
    if (!in_set(v, kL1Grid)) fail("tune_oat: L1 value outside the tuning grid");
  for (int v : grids.batch_size)
    if (!in_set(v, kBatchGrid)) fail("tune_oat: batch size outside the tuning grid");
  for (int v : grids.epochs)
    if (!in_set(v, kEpochGrid)) fail("tune_oat: epoch count outside the tuning grid");
}

}  // namespace

TuneResult tune_oat(const Dataset& d, const TrainConfig& base, const TuneGrids& grids,
                    TuneMetric metric, const TuneHooks& hooks, int workers) {
  base.validate();
  validate_grids(grids);
  const auto parts = split_dataset(d, {1.0 - base.val_fraction, base.val_fraction}, base.seed);
  const Dataset& work = parts[0];
  const Dataset& fold = parts[1];

  auto evaluate = [&](const TrainConfig& candidate) {
    const auto [params, report] = train(work, candidate, {}, workers);
    if (hooks.metric) return hooks.metric(params, fold, candidate);
    if (metric == TuneMetric::kIbs) return ibs(params, fold, EvaluationConfig{}, candidate.ode);
    return dataset_loss(params, fold, 0.0, candidate.ode, workers).negloglik;
  };

  TuneResult result;
  result.best = base;

  auto sweep = [&](const std::string& name, const auto& values, auto apply, auto current) {
    if (values.empty()) return;
    double best_metric = kInf;
    auto best_value = current(result.best);
    std::size_t first_row = result.table.size();
    for (const auto& v : values) {
      TrainConfig candidate = result.best;
      apply(candidate, v);
      const double m = evaluate(candidate);
      result.table.push_back({name, static_cast<double>(v), m, false});
      if (m < best_metric) {
        best_metric = m;
        best_value = v;
      }
    }
    apply(result.best, best_value);
    for (std::size_t r = first_row; r < result.table.size(); ++r)
      result.table[r].selected =
          result.table[r].value == static_cast<double>(best_value) && result.table[r].param == name;
  };

  sweep(
      "nodes", grids.nodes,
      [](TrainConfig& c, int v) { c.hidden.assign(c.hidden.size(), v); },
      [](const TrainConfig& c) { return c.hidden.front(); });
  sweep(
      "learning_rate", grids.learning_rate,
      [](TrainConfig& c, double v) { c.learning_rate = v; },
      [](const TrainConfig& c) { return c.learning_rate; });
  sweep(
      "alpha", grids.alpha, [](TrainConfig& c, double v) { c.alpha = v; },
      [](const TrainConfig& c) { return c.alpha; });
  sweep(
      "batch_size", grids.batch_size, [](TrainConfig& c, int v) { c.batch_size = v; },
      [](const TrainConfig& c) { return c.batch_size; });
  sweep(
      "epochs", grids.epochs, [](TrainConfig& c, int v) { c.epochs = v; },
      [](const TrainConfig& c) { return c.epochs; });

  return result;
}

}  // namespace icoden
