#pragma once

// The "mans" command line: train, eval, ablate, gradcheck and synth.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O error,
// 3 numerical failure (non-finite loss, failed gradient check).

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mans/config.hpp"
#include "mans/data.hpp"
#include "mans/model.hpp"

namespace mans {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr const char* kVersion = "mans 1.0.0";

struct AblationCell {
  std::string grid;     // "variant" or "alpha"
  std::string setting;  // variant name or alpha value
  ExperimentConfig config;
  std::uint64_t split_hash = 0;
  double test_accuracy = 0.0;

  bool config_matches(const ExperimentConfig& other) const;
};

struct AblationSummary {
  std::string grid;
  std::string setting;
  std::vector<double> accuracies;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

/// Trains every (variant, seed) cell for stcm_only, no_attention and full, then every
/// (alpha, seed) cell of the full model, on one split. Seeds run from
/// config.experiment.seed upwards; a cell identical to an earlier one is reused.
std::vector<AblationCell> run_ablation(const RunConfig& config, const GridSplit& split,
                                       const std::function<void(const AblationCell&)>& on_cell = {});
std::vector<AblationSummary> summarize_ablation(const std::vector<AblationCell>& cells);

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace mans
