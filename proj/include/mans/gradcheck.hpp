#pragma once

// Central finite-difference checks of reverse-mode gradients (float64).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mans/model.hpp"
#include "mans/tensor.hpp"

namespace mans {

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

using LossFn = std::function<Tensor<double>(Tape<double>&)>;

struct FdOptions {
  double h = 1e-5;
  double floor = 1e-6;
  /// Check at most this many entries per tensor (evenly strided); 0 checks all.
  std::size_t max_entries = 0;
  std::optional<BackwardFault> fault;
};

/// Compares tape.backward(loss(tape)) with central differences of loss for every
/// entry of every tensor in `inputs`. `loss` must read the inputs by handle.
std::vector<TensorCheck> check_gradients(const LossFn& loss,
                                         const std::vector<NamedTensor<double>>& inputs,
                                         const FdOptions& options = {});

/// T = N = 10, K = 4, alpha = 2, mans9 with widths 4 and 8, three classes.
ExperimentConfig reduced_config();

/// Report group of a parameter name, e.g. "tarm.bigru" or "stcm.bn".
std::string gradcheck_group(const std::string& parameter);

struct GradcheckGroup {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  bool passed = true;
};

struct GradcheckReport {
  double tolerance = 1e-4;
  std::vector<GradcheckGroup> groups;
  std::vector<TensorCheck> tensors;

  bool passed() const;
  std::vector<std::string> failed_groups() const;
  std::string format() const;
};

struct GradcheckOptions {
  ExperimentConfig config = reduced_config();
  std::size_t batch = 2;
  std::uint64_t data_seed = 11;
  double tolerance = 1e-4;
  FdOptions fd;
};

/// Full-model check in train mode on a fixed random batch.
GradcheckReport gradcheck(const GradcheckOptions& options = {});

}  // namespace mans
