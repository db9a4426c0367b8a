#include "triq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "triq/error.hpp"

namespace triq {
namespace {

void require_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n, const char* what) {
  if (x.size() != y.size()) {
    throw DimensionError(std::string(what) + ": length mismatch " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  }
  if (x.size() < min_n) {
    throw ParameterError(std::string(what) + ": needs at least " + std::to_string(min_n) + " samples");
  }
}

}  // namespace

double plcc(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, 2, "plcc");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ParameterError("correlation undefined for a constant vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double srocc(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, 2, "srocc");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return plcc(rx, ry);
}

double rmse(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, 1, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(acc / static_cast<double>(x.size()));
}

MetricReport evaluate_metrics(std::span<const double> predicted, std::span<const double> truth) {
  MetricReport report;
  report.n = predicted.size();
  report.rmse = rmse(predicted, truth);
  try {
    report.plcc = plcc(predicted, truth);
    report.srocc = srocc(predicted, truth);
  } catch (const ParameterError&) {
    report.plcc.reset();
    report.srocc.reset();
  }
  return report;
}

}  // namespace triq
