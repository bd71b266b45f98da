#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "icoden/core_data.hpp"
#include "icoden/likelihood.hpp"

namespace icoden {

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  std::vector<int> hidden = {10, 10};
  double alpha = 0.01;
  int batch_size = 100;
  int epochs = 50;
  double learning_rate = 0.1;
  Optimizer optimizer = Optimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int patience = 10;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  ODEConfig ode;

  void validate() const;
};

// Per-epoch loss history. train_loss is the running sum of batch negative
// log-likelihoods plus alpha*||theta||_1 at epoch end; val_loss is the
// unpenalized negative log-likelihood summed over the validation fold.
struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int stopped_epoch = 0;  // epochs completed
  int best_epoch = 0;     // 1-based argmin of val_loss
  double wall_seconds = 0.0;
};

struct TrainHooks {
  // Replaces the validation-loss computation when set (epoch is 1-based).
  std::function<double(const MLPParams&, const Dataset&, int)> val_metric;
};

// Minibatch penalized-likelihood training with a seeded validation split,
// per-epoch reshuffling, and early stopping once the validation loss fails to
// improve for `patience` consecutive epochs. Returns the parameters of the
// best-validation epoch.
std::pair<MLPParams, TrainReport> train(const Dataset& d, const TrainConfig& cfg,
                                        const TrainHooks& hooks = {}, int workers = 1);

void write_train_report(const std::string& path, const TrainReport& report);

enum class TuneMetric { kValLoss, kIbs };

// One-at-a-time grids; an empty list skips that hyperparameter. Values must
// stay inside the published tuning ranges (nodes 10..500; L1, batch, epoch
// and learning-rate grids as fixed sets).
struct TuneGrids {
  std::vector<int> nodes;
  std::vector<double> learning_rate;
  std::vector<double> alpha;
  std::vector<int> batch_size;
  std::vector<int> epochs;
};

struct TuneRow {
  std::string param;
  double value = 0.0;
  double metric = 0.0;
  bool selected = false;
};

struct TuneResult {
  TrainConfig best;
  std::vector<TuneRow> table;
};

struct TuneHooks {
  // Replaces the tuning metric when set: (trained params, tune fold, candidate).
  std::function<double(const MLPParams&, const Dataset&, const TrainConfig&)> metric;
};

// Holds all hyperparameters fixed while sweeping one grid at a time in the
// order nodes, learning_rate, alpha, batch_size, epochs; keeps each winner.
TuneResult tune_oat(const Dataset& d, const TrainConfig& base, const TuneGrids& grids,
                    TuneMetric metric, const TuneHooks& hooks = {}, int workers = 1);

}  // namespace icoden
