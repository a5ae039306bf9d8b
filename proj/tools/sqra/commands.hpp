#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace sqra::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything a subcommand needs besides the config; recorded in the manifest.
struct Options {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string axis;
  std::string values;
  std::vector<std::string> baselines;
  int baseline_grid = 50;
  std::string scores_path;
  int points = 1000;
  long long samples = 100'000;

  nlohmann::json to_json() const;
  static Options from_json(const nlohmann::json& args);
};

/// Parses "a,b,c" or "start:stop:count".
std::vector<double> parse_values(const std::string& text);

/// Runs one subcommand and writes its outputs plus a manifest into
/// opts.out_dir. Returns the process exit code.
int run_command(const Options& opts, const ConfigSource& config);

/// Re-runs the command recorded in a manifest with its embedded config.
int replay_manifest(const std::string& manifest_path, const std::optional<std::string>& out_dir);

}  // namespace sqra::cli
