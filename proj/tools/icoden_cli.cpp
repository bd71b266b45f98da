#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "icoden/commands.hpp"
#include "icoden/parallel.hpp"

namespace {

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("icoden: cannot open config file: " + path);
  nlohmann::json config;
  try {
    in >> config;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("icoden: malformed config JSON: " + std::string(e.what()));
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ICODEN: ODE-based neural hazard modeling for interval-censored survival data"};
  app.require_subcommand(1);

  std::string config_path;
  icoden::cli::GlobalOptions opts;
  opts.workers = icoden::default_workers();
  std::uint64_t seed = 0;
  bool seed_set = false;

  const std::vector<std::string> commands = {"simulate", "train",    "predict",  "evaluate",
                                             "tune",     "subgroup", "benchmark"};
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out-dir", opts.out_dir, "output directory (default .)");
    sub->add_option("--workers", opts.workers, "worker thread cap (default: cores)");
    sub->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
      seed_set = true;
    });
  }

  CLI11_PARSE(app, argc, argv);
  if (seed_set) opts.seed_override = seed;

  try {
    const auto config = load_config(config_path);
    icoden::cli::run_command(app.get_subcommands().front()->get_name(), config, opts);
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    err["command"] = app.get_subcommands().empty()
                         ? std::string{}
                         : app.get_subcommands().front()->get_name();
    std::cerr << err.dump() << '\n';
    return 1;
  }
  return 0;
}
