#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "sqra/experiment.hpp"

namespace sqra::cli {

/// Bad input: malformed JSON, a missing or invalid field, a bad flag value.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parsed config file. `text` is kept so diagnostics can point at lines.
struct ConfigSource {
  std::string name;
  std::string text;
  nlohmann::json json;
};

ConfigSource read_config_file(const std::string& path);
ConfigSource parse_config_text(std::string text, std::string name);

/// Builds and validates the experiment configuration. Every problem is
/// reported as a ValidationError naming the field and, when it can be found
/// in the text, its line and column.
ExperimentConfig to_experiment_config(const ConfigSource& source);

/// FNV-1a over the key-sorted compact dump, so key order does not matter.
std::uint64_t config_hash(const nlohmann::json& config);
std::string hex64(std::uint64_t value);

}  // namespace sqra::cli
