#include "icoden/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>
#include <vector>

#include "icoden/core_data.hpp"
#include "icoden/evaluation.hpp"
#include "icoden/parallel.hpp"
#include "icoden/rng.hpp"
#include "icoden/simulator.hpp"
#include "icoden/subgroup.hpp"
#include "icoden/trainer.hpp"
#include "icoden/weibull_ph.hpp"

namespace icoden::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!obj.is_object()) fail(context + " must be a JSON object");
  for (const auto& item : obj.items())
    if (!allowed.count(item.key())) fail("unknown key '" + item.key() + "' in " + context);
}

std::string out_path(const GlobalOptions& opts, const std::string& name) {
  if (!name.empty() && name.front() == '/') return name;
  return opts.out_dir + "/" + name;
}

ODEConfig parse_ode(const json& obj) {
  check_keys(obj, {"method", "n_steps", "rtol", "atol", "max_steps"}, "ode config");
  ODEConfig cfg;
  const std::string method = obj.value("method", "rk4");
  if (method == "rk4") cfg.method = OdeMethod::kRK4;
  else if (method == "dopri45") cfg.method = OdeMethod::kDopri45;
  else fail("ode method must be rk4 or dopri45");
  cfg.n_steps = obj.value("n_steps", cfg.n_steps);
  cfg.rtol = obj.value("rtol", cfg.rtol);
  cfg.atol = obj.value("atol", cfg.atol);
  cfg.max_steps = obj.value("max_steps", cfg.max_steps);
  cfg.validate();
  return cfg;
}

TrainConfig parse_train(const json& obj, const GlobalOptions& opts) {
  check_keys(obj,
             {"hidden", "alpha", "batch_size", "epochs", "learning_rate", "optimizer", "patience",
              "val_fraction", "seed", "ode"},
             "train config");
  TrainConfig cfg;
  if (obj.contains("hidden")) cfg.hidden = obj.at("hidden").get<std::vector<int>>();
  cfg.alpha = obj.value("alpha", cfg.alpha);
  cfg.batch_size = obj.value("batch_size", cfg.batch_size);
  cfg.epochs = obj.value("epochs", cfg.epochs);
  cfg.learning_rate = obj.value("learning_rate", cfg.learning_rate);
  const std::string optimizer = obj.value("optimizer", "adam");
  if (optimizer == "adam") cfg.optimizer = Optimizer::kAdam;
  else if (optimizer == "sgd") cfg.optimizer = Optimizer::kSgd;
  else fail("optimizer must be adam or sgd");
  cfg.patience = obj.value("patience", cfg.patience);
  cfg.val_fraction = obj.value("val_fraction", cfg.val_fraction);
  cfg.seed = obj.value("seed", cfg.seed);
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  if (obj.contains("ode")) cfg.ode = parse_ode(obj.at("ode"));
  cfg.validate();
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  json obj;
  obj["hidden"] = cfg.hidden;
  obj["alpha"] = cfg.alpha;
  obj["batch_size"] = cfg.batch_size;
  obj["epochs"] = cfg.epochs;
  obj["learning_rate"] = cfg.learning_rate;
  obj["optimizer"] = cfg.optimizer == Optimizer::kAdam ? "adam" : "sgd";
  obj["patience"] = cfg.patience;
  obj["val_fraction"] = cfg.val_fraction;
  obj["seed"] = cfg.seed;
  obj["ode"] = {{"method", cfg.ode.method == OdeMethod::kRK4 ? "rk4" : "dopri45"},
                {"n_steps", cfg.ode.n_steps},
                {"rtol", cfg.ode.rtol},
                {"atol", cfg.ode.atol},
                {"max_steps", cfg.ode.max_steps}};
  return obj;
}

// Either an ICODEN model JSON or a Weibull-PH JSON; told apart by their keys.
struct AnyModel {
  bool is_icoden = true;
  MLPParams net;
  WeibullPHParams weibull;

  Eigen::VectorXd cumhaz(const Eigen::MatrixXd& X, const Eigen::VectorXd& t,
                         const ODEConfig& ode, int workers) const {
    if (is_icoden) return batch_solve(net, X, t, ode, workers);
    Eigen::VectorXd out(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i)
      out[i] = weibull_cumhaz(weibull, X.row(i).transpose(), t[i]);
    return out;
  }
};

AnyModel load_any_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open model file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail("malformed model JSON: " + std::string(e.what()));
  }
  AnyModel model;
  if (doc.contains("log_scale")) {
    model.is_icoden = false;
    model.weibull = load_weibull(path).params;
  } else {
    model.net = load_model(path);
  }
  return model;
}

void write_labels_csv(const std::string& path, const SubgroupResult& result) {
  std::ofstream out(path);
  if (!out) fail("cannot write labels file: " + path);
  out << "subject_index,label,log_cumhaz\n";
  for (std::size_t i = 0; i < result.labels.size(); ++i)
    out << i << ',' << result.labels[i] << ',' << format_double(result.log_cumhaz[i]) << '\n';
}

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;
};

// Mean and sample standard deviation (n-1 denominator).
SummaryStats summarize(const std::vector<double>& values) {
  SummaryStats s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

}  // namespace

void cmd_simulate(const json& config, const GlobalOptions& opts) {
  check_keys(config,
             {"kind", "n", "seed", "scenario", "p", "beta_seed", "visit_rate", "mean_visits",
              "n_visits", "data_out", "truth_out"},
             "simulate config");
  const std::string kind = config.value("kind", "scenario");
  const std::uint64_t seed =
      opts.seed_override ? *opts.seed_override : config.value("seed", std::uint64_t{0});

  SimulatedData sim;
  if (kind == "simple") {
    SimpleConfig cfg;
    cfg.n = config.value("n", cfg.n);
    cfg.seed = seed;
    cfg.visit_rate = config.value("visit_rate", cfg.visit_rate);
    cfg.n_visits = config.value("n_visits", cfg.n_visits);
    sim = gen_simple(cfg);
  } else if (kind == "scenario") {
    ScenarioConfig cfg;
    cfg.scenario = config.value("scenario", cfg.scenario);
    cfg.n = config.value("n", cfg.n);
    cfg.p = config.value("p", cfg.p);
    cfg.seed = seed;
    cfg.beta_seed = config.value("beta_seed", cfg.beta_seed);
    cfg.visit_rate = config.value("visit_rate", cfg.visit_rate);
    cfg.mean_visits = config.value("mean_visits", cfg.mean_visits);
    sim = gen_scenario(cfg);
  } else {
    fail("simulate kind must be simple or scenario");
  }

  const std::string data_path = out_path(opts, config.value("data_out", "data.csv"));
  const std::string truth_path = out_path(opts, config.value("truth_out", "truth.csv"));
  write_dataset(data_path, sim.data);
  write_truth(truth_path, sim.truth);

  std::size_t left = 0, interval = 0, right = 0;
  for (const Subject& s : sim.data.subjects) {
    if (s.right_censored()) ++right;
    else if (s.l == 0.0) ++left;
    else ++interval;
  }
  std::cout << "simulated n=" << sim.data.size() << " p=" << sim.data.p()
            << " left-censored=" << left << " interval-censored=" << interval
            << " right-censored=" << right << '\n'
            << "wrote " << data_path << " and " << truth_path << '\n';
}

void cmd_train(const json& config, const GlobalOptions& opts) {
  check_keys(config, {"data", "has_truncation", "train", "model_out", "report_out"},
             "train config");
  const Dataset d =
      load_dataset(config.at("data").get<std::string>(), config.value("has_truncation", false));
  const TrainConfig cfg = parse_train(config.value("train", json::object()), opts);

  const auto [params, report] = train(d, cfg, {}, opts.workers);
  const std::string model_path = out_path(opts, config.value("model_out", "model.json"));
  const std::string report_path = out_path(opts, config.value("report_out", "report.csv"));
  save_model(model_path, params, cfg.seed);
  write_train_report(report_path, report);
  std::cout << "trained " << report.stopped_epoch << " epochs (best " << report.best_epoch
            << ", val loss " << format_double(report.val_loss[report.best_epoch - 1]) << ", "
            << format_double(report.wall_seconds) << "s)\n"
            << "wrote " << model_path << " and " << report_path << '\n';
}

void cmd_predict(const json& config, const GlobalOptions& opts) {
  check_keys(config, {"model", "data", "has_truncation", "times", "ode", "curves_out"},
             "predict config");
  const AnyModel model = load_any_model(config.at("model").get<std::string>());
  const Dataset d =
      load_dataset(config.at("data").get<std::string>(), config.value("has_truncation", false));
  const ODEConfig ode = config.contains("ode") ? parse_ode(config.at("ode")) : ODEConfig{};

  std::vector<double> times;
  const json& tspec = config.at("times");
  if (tspec.is_array()) {
    times = tspec.get<std::vector<double>>();
  } else {
    check_keys(tspec, {"start", "stop", "count"}, "times spec");
    const double start = tspec.at("start").get<double>();
    const double stop = tspec.at("stop").get<double>();
    const int count = tspec.at("count").get<int>();
    if (count < 2 || !(stop > start) || !(start >= 0.0)) fail("bad times spec");
    for (int g = 0; g < count; ++g)
      times.push_back(start + (stop - start) * g / (count - 1));
  }
  for (std::size_t g = 0; g < times.size(); ++g) {
    if (!(times[g] >= 0.0)) fail("prediction times must be >= 0");
    if (g > 0 && !(times[g] > times[g - 1])) fail("prediction times must strictly increase");
  }

  // One row per subject x time, in subject-major order.
  const std::size_t m = times.size();
  Eigen::MatrixXd X(d.size() * m, d.p());
  Eigen::VectorXd t(d.size() * m);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t g = 0; g < m; ++g) {
      X.row(i * m + g) = d.subjects[i].x.transpose();
      t[i * m + g] = times[g];
    }
  const Eigen::VectorXd lambdas = model.cumhaz(X, t, ode, opts.workers);

  const std::string curves_path = out_path(opts, config.value("curves_out", "curves.csv"));
  std::ofstream out(curves_path);
  if (!out) fail("cannot write curves file: " + curves_path);
  out << "subject_index,t,survival\n";
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t g = 0; g < m; ++g)
      out << i << ',' << format_double(times[g]) << ','
          << format_double(std::exp(-lambdas[i * m + g])) << '\n';
  std::cout << "wrote " << d.size() * m << " curve rows to " << curves_path << '\n';
}

void cmd_evaluate(const json& config, const GlobalOptions& opts) {
  check_keys(config,
             {"model", "data", "has_truncation", "truth", "grid_points", "ode", "metrics_out",
              "per_subject_out"},
             "evaluate config");
  const AnyModel model = load_any_model(config.at("model").get<std::string>());
  if (!model.is_icoden) fail("evaluate expects an ICODEN model file");
  const Dataset d =
      load_dataset(config.at("data").get<std::string>(), config.value("has_truncation", false));
  const ODEConfig ode = config.contains("ode") ? parse_ode(config.at("ode")) : ODEConfig{};
  EvaluationConfig eval_cfg;
  eval_cfg.grid_points = config.value("grid_points", eval_cfg.grid_points);

  json metrics;
  if (config.contains("truth")) {
    const auto truth = load_truth(config.at("truth").get<std::string>());
    metrics["mse"] = mse_survival(model.net, d, truth, eval_cfg, ode, opts.workers);
  }
  metrics["ibs"] = ibs(model.net, d, eval_cfg, ode, opts.workers);
  const Eigen::VectorXd medians = predict_medians(model.net, d, ode, opts.workers);
  std::size_t outside = 0;
  double dist_total = 0.0;
  std::vector<double> dist_terms(d.size());
  std::vector<bool> inside_flags(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Subject& s = d.subjects[i];
    const bool inside =
        s.right_censored() ? medians[i] > s.l : (medians[i] > s.l && medians[i] <= s.r);
    inside_flags[i] = inside;
    if (!inside) ++outside;
    double dist = std::abs(s.l - medians[i]);
    if (std::isfinite(s.r)) dist = std::min(dist, std::abs(s.r - medians[i]));
    dist_terms[i] = dist;
    dist_total += dist;
  }
  metrics["p_out"] = static_cast<double>(outside) / static_cast<double>(d.size());
  metrics["d_out"] = dist_total / static_cast<double>(d.size());
  metrics["n"] = d.size();
  metrics["u"] = ibs_horizon(d);

  const std::string metrics_path = out_path(opts, config.value("metrics_out", "metrics.json"));
  std::ofstream out(metrics_path);
  if (!out) fail("cannot write metrics file: " + metrics_path);
  out << metrics.dump(2) << '\n';
  std::cout << metrics.dump() << '\n';

  if (config.contains("per_subject_out")) {
    const std::string per_path = out_path(opts, config.at("per_subject_out").get<std::string>());
    std::ofstream per(per_path);
    if (!per) fail("cannot write per-subject file: " + per_path);
    per << "subject_index,t_median,inside,d_term\n";
    for (std::size_t i = 0; i < d.size(); ++i)
      per << i << ',' << format_double(medians[i]) << ',' << (inside_flags[i] ? 1 : 0) << ','
          << format_double(dist_terms[i]) << '\n';
  }
}

void cmd_tune(const json& config, const GlobalOptions& opts) {
  check_keys(config,
             {"data", "has_truncation", "base", "grids", "metric", "best_out", "table_out"},
             "tune config");
  const Dataset d =
      load_dataset(config.at("data").get<std::string>(), config.value("has_truncation", false));
  const TrainConfig base = parse_train(config.value("base", json::object()), opts);

  const json& grids_json = config.value("grids", json::object());
  check_keys(grids_json, {"nodes", "learning_rate", "alpha", "batch_size", "epochs"},
             "tune grids");
  TuneGrids grids;
  if (grids_json.contains("nodes")) grids.nodes = grids_json.at("nodes").get<std::vector<int>>();
  if (grids_json.contains("learning_rate"))
    grids.learning_rate = grids_json.at("learning_rate").get<std::vector<double>>();
  if (grids_json.contains("alpha"))
    grids.alpha = grids_json.at("alpha").get<std::vector<double>>();
  if (grids_json.contains("batch_size"))
    grids.batch_size = grids_json.at("batch_size").get<std::vector<int>>();
  if (grids_json.contains("epochs"))
    grids.epochs = grids_json.at("epochs").get<std::vector<int>>();

  const std::string metric_name = config.value("metric", "val_loss");
  TuneMetric metric;
  if (metric_name == "val_loss") metric = TuneMetric::kValLoss;
  else if (metric_name == "ibs") metric = TuneMetric::kIbs;
  else fail("tune metric must be val_loss or ibs");

  const TuneResult result = tune_oat(d, base, grids, metric, {}, opts.workers);

  const std::string best_path = out_path(opts, config.value("best_out", "best_config.json"));
  std::ofstream best(best_path);
  if (!best) fail("cannot write best config: " + best_path);
  best << train_config_to_json(result.best).dump(2) << '\n';

  const std::string table_path = out_path(opts, config.value("table_out", "tuning_table.csv"));
  std::ofstream table(table_path);
  if (!table) fail("cannot write tuning table: " + table_path);
  table << "param,value,metric,selected\n";
  for (const TuneRow& row : result.table)
    table << row.param << ',' << format_double(row.value) << ',' << format_double(row.metric)
          << ',' << (row.selected ? 1 : 0) << '\n';
  std::cout << "evaluated " << result.table.size() << " tuning rows; wrote " << best_path
            << " and " << table_path << '\n';
}

void cmd_subgroup(const json& config, const GlobalOptions& opts) {
  check_keys(config,
             {"model", "data", "has_truncation", "t_star", "k", "seed", "ode", "labels_out",
              "bands_prefix"},
             "subgroup config");
  const AnyModel model = load_any_model(config.at("model").get<std::string>());
  if (!model.is_icoden) fail("subgroup expects an ICODEN model file");
  const Dataset d =
      load_dataset(config.at("data").get<std::string>(), config.value("has_truncation", false));
  const ODEConfig ode = config.contains("ode") ? parse_ode(config.at("ode")) : ODEConfig{};
  const double t_star = config.at("t_star").get<double>();
  int k = 0;
  if (config.contains("k") && !config.at("k").is_string()) k = config.at("k").get<int>();
  else if (config.contains("k") && config.at("k").get<std::string>() != "auto")
    fail("k must be an integer or \"auto\"");
  const std::uint64_t seed =
      opts.seed_override ? *opts.seed_override : config.value("seed", std::uint64_t{0});

  const SubgroupResult result = identify_subgroups(model.net, d, t_star, k, seed, ode,
                                                   opts.workers);
  const std::string labels_path = out_path(opts, config.value("labels_out", "labels.csv"));
  write_labels_csv(labels_path, result);

  const std::string prefix = config.value("bands_prefix", "band");
  for (int g = 0; g < result.gmm.k; ++g) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < result.labels.size(); ++i)
      if (result.labels[i] == g) members.push_back(i);
    const std::string band_path = out_path(opts, prefix + "_" + std::to_string(g) + ".csv");
    std::ofstream out(band_path);
    if (!out) fail("cannot write band file: " + band_path);
    out << "t,lower,upper\n";
    if (!members.empty()) {
      const TurnbullFit fit = turnbull(d.subset(members));
      for (Eigen::Index j = 0; j < fit.band_times.size(); ++j)
        out << format_double(fit.band_times[j]) << ',' << format_double(fit.lower[j]) << ','
            << format_double(fit.upper[j]) << '\n';
    }
  }
  std::cout << "identified " << result.gmm.k << " subgroups over " << d.size()
            << " subjects; wrote " << labels_path << '\n';
}

void cmd_benchmark(const json& config, const GlobalOptions& opts) {
  check_keys(config,
             {"scenario", "p", "n_train", "n_test", "replicates", "seed", "beta_seed", "train",
              "models", "grid_points", "summary_out", "replicates_out"},
             "benchmark config");
  ScenarioConfig scenario;
  scenario.scenario = config.at("scenario").get<int>();
  scenario.p = config.at("p").get<int>();
  const int n_train = config.value("n_train", 1000);
  const int n_test = config.value("n_test", 1000);
  const int replicates = config.value("replicates", 10);
  if (replicates < 1) fail("replicates must be >= 1");
  const std::uint64_t seed =
      opts.seed_override ? *opts.seed_override : config.value("seed", std::uint64_t{0});
  scenario.beta_seed = config.value("beta_seed", std::uint64_t{7});
  const TrainConfig train_cfg = parse_train(config.value("train", json::object()), opts);
  EvaluationConfig eval_cfg;
  eval_cfg.grid_points = config.value("grid_points", eval_cfg.grid_points);

  std::vector<std::string> models = {"icoden", "weibull_ph"};
  if (config.contains("models")) models = config.at("models").get<std::vector<std::string>>();
  for (const auto& m : models)
    if (m != "icoden" && m != "weibull_ph") fail("models must be icoden and/or weibull_ph");
  const bool run_icoden = std::count(models.begin(), models.end(), "icoden") > 0;
  const bool run_weibull = std::count(models.begin(), models.end(), "weibull_ph") > 0;

  std::vector<double> icoden_mse(replicates, 0.0), weibull_mse(replicates, 0.0);
  // Replicates run in parallel; everything inside a replicate is single-threaded
  // so results do not depend on the worker count.
  parallel_for(static_cast<std::size_t>(replicates), opts.workers, [&](std::size_t r) {
    CounterRng derive(seed, 0xBE7C + r);
    ScenarioConfig train_scenario = scenario;
    train_scenario.n = n_train;
    train_scenario.seed = derive.next_u64();
    ScenarioConfig test_scenario = scenario;
    test_scenario.n = n_test;
    test_scenario.seed = derive.next_u64();
    TrainConfig cfg = train_cfg;
    cfg.seed = derive.next_u64();

    const SimulatedData train_data = gen_scenario(train_scenario);
    const SimulatedData test_data = gen_scenario(test_scenario);

    if (run_icoden) {
      const auto [params, report] = train(train_data.data, cfg, {}, 1);
      icoden_mse[r] =
          mse_survival(params, test_data.data, test_data.truth, eval_cfg, cfg.ode, 1);
    }
    if (run_weibull) {
      const WeibullPHFit fit = fit_weibull_ph(train_data.data);
      double total = 0.0;
      const int m = eval_cfg.grid_points;
      for (std::size_t i = 0; i < test_data.data.size(); ++i) {
        const Subject& s = test_data.data.subjects[i];
        const TruthRecord& truth = test_data.truth[i];
        const double h = truth.t_true / (m - 1);
        double acc = 0.0;
        for (int g = 0; g < m; ++g) {
          const double t = g * h;
          const double diff =
              truth.survival(t) - std::exp(-weibull_cumhaz(fit.params, s.x, t));
          acc += (g == 0 || g == m - 1 ? 0.5 : 1.0) * diff * diff;
        }
        total += acc * h / truth.t_true;
      }
      weibull_mse[r] = total / static_cast<double>(test_data.data.size());
    }
  });

  const std::string tag_scenario = "scenario" + std::to_string(scenario.scenario);
  const std::string tag_p = "p" + std::to_string(scenario.p);

  const std::string reps_path =
      out_path(opts, config.value("replicates_out", "benchmark_replicates.csv"));
  std::ofstream reps(reps_path);
  if (!reps) fail("cannot write replicate file: " + reps_path);
  reps << "scenario,p,model,replicate,mse\n";
  for (int r = 0; r < replicates; ++r) {
    if (run_icoden)
      reps << tag_scenario << ',' << tag_p << ",icoden," << r << ','
           << format_double(icoden_mse[r]) << '\n';
    if (run_weibull)
      reps << tag_scenario << ',' << tag_p << ",weibull_ph," << r << ','
           << format_double(weibull_mse[r]) << '\n';
  }

  const std::string summary_path = out_path(opts, config.value("summary_out", "benchmark.csv"));
  std::ofstream summary(summary_path);
  if (!summary) fail("cannot write summary file: " + summary_path);
  summary << "scenario,p,model,mean_mse,sd_mse\n";
  auto emit = [&](const std::string& model, const std::vector<double>& values) {
    const SummaryStats s = summarize(values);
    summary << tag_scenario << ',' << tag_p << ',' << model << ',' << format_double(s.mean)
            << ',' << format_double(s.sd) << '\n';
    std::cout << tag_scenario << ' ' << tag_p << ' ' << model << ": mse "
              << format_double(s.mean) << " (" << format_double(s.sd) << ")\n";
  };
  if (run_icoden) emit("icoden", icoden_mse);
  if (run_weibull) emit("weibull_ph", weibull_mse);
  std::cout << "wrote " << summary_path << " and " << reps_path << '\n';
}

void run_command(const std::string& command, const json& config, const GlobalOptions& opts) {
  if (command == "simulate") cmd_simulate(config, opts);
  else if (command == "train") cmd_train(config, opts);
  else if (command == "predict") cmd_predict(config, opts);
  else if (command == "evaluate") cmd_evaluate(config, opts);
  else if (command == "tune") cmd_tune(config, opts);
  else if (command == "subgroup") cmd_subgroup(config, opts);
  else if (command == "benchmark") cmd_benchmark(config, opts);
  else fail("unknown command: " + command);
}

}  // namespace icoden::cli
