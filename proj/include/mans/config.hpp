#pragma once

// Flat "key = value" run configuration shared by the command-line tools.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mans/data.hpp"
#include "mans/model.hpp"

namespace mans {

struct RunConfig {
  ExperimentConfig experiment;
  /// Directory holding corpus.tsv; empty means the synthetic corpus from `synth`.
  std::string corpus;
  SynthSpec synth;
  std::size_t eval_batch = 32;
  /// Number of consecutive seeds, starting at experiment.seed, used by ablate.
  std::size_t ablation_seeds = 5;
  std::vector<std::size_t> alphas = {4, 8, 16, 32};
};

/// Keys: T N K alpha depth width1 width2 lr momentum weight_decay batch_size epochs
/// seed num_classes variant use_shortcuts attention_bias corpus eval_batch
/// ablation_seeds alphas, plus "synth.<key>" for the synthetic corpus.
std::vector<std::string> config_keys();

/// Throws ArgumentError naming the key when it is unknown or the value is invalid.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses a config file; errors carry the line number.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value, in config_keys() order.
std::vector<std::pair<std::string, std::string>> config_values(const RunConfig& config);

}  // namespace mans
