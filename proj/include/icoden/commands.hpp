#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace icoden::cli {

struct GlobalOptions {
  std::string out_dir = ".";
  int workers = 1;
  std::optional<std::uint64_t> seed_override;
};

// Each command validates its config (unknown keys rejected), runs, writes its
// artifacts under out_dir, and prints a short summary. Failures throw.
void cmd_simulate(const nlohmann::json& config, const GlobalOptions& opts);
void cmd_train(const nlohmann::json& config, const GlobalOptions& opts);
void cmd_predict(const nlohmann::json& config, const GlobalOptions& opts);
void cmd_evaluate(const nlohmann::json& config, const GlobalOptions& opts);
void cmd_tune(const nlohmann::json& config, const GlobalOptions& opts);
void cmd_subgroup(const nlohmann::json& config, const GlobalOptions& opts);
void cmd_benchmark(const nlohmann::json& config, const GlobalOptions& opts);

// Dispatch by subcommand name; throws on unknown commands.
void run_command(const std::string& command, const nlohmann::json& config,
                 const GlobalOptions& opts);

}  // namespace icoden::cli
