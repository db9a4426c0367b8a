#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace triq {

/// Pearson linear correlation. Needs n >= 2 and non-constant inputs
/// (ParameterError otherwise); DimensionError on a length mismatch.
double plcc(std::span<const double> x, std::span<const double> y);

/// 1-based ranks; tied values share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> x);

/// Spearman rank-order correlation: Pearson on average ranks.
double srocc(std::span<const double> x, std::span<const double> y);

double rmse(std::span<const double> x, std::span<const double> y);

struct MetricReport {
  std::size_t n = 0;
  /// Empty when the correlation is undefined (n < 2 or a constant vector).
  std::optional<double> plcc;
  std::optional<double> srocc;
  double rmse = 0.0;
};

/// Computes all three criteria; correlations degrade to nullopt instead of throwing.
MetricReport evaluate_metrics(std::span<const double> predicted, std::span<const double> truth);

}  // namespace triq
