#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "triq/tensor.hpp"

namespace triq {

struct GradCheckOptions {
  double step = 1e-5;
  /// 0 checks every coordinate; otherwise a seeded random sample per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Builds the scalar loss from the current parameter values. The tape is
/// null for the finite-difference evaluations.
using LossFn = std::function<Tensor(GradTape*)>;

/// Compares reverse-mode gradients against central differences.
///
/// Relative error per coordinate is |a - n| / max(1e-8, |a| + |n|). Parameter
/// values are restored afterwards; their gradients are left holding the
/// analytic result.
GradCheckReport grad_check(const LossFn& forward, std::span<Tensor> params, const GradCheckOptions& options = {});

}  // namespace triq
