#include "triq/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "triq/error.hpp"

namespace triq {
namespace {

double evaluate(const LossFn& forward) {
  const Tensor loss = forward(nullptr);
  if (loss.numel() != 1) throw ContractError("grad_check: loss must be scalar");
  const double value = loss.item();
  if (!std::isfinite(value)) throw NumericError("grad_check: non-finite forward value");
  return value;
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(const LossFn& forward, std::span<Tensor> params, const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ParameterError("grad_check: step must be positive");

  for (Tensor& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    GradTape tape;
    const Tensor loss = forward(&tape);
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite forward value");
    // A loss that touches no parameter is never recorded; all gradients are 0.
    if (loss.requires_grad()) tape.backward(loss);
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    std::vector<double> analytic(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());

    auto values = p.data_mut();
    for (std::size_t coord : pick_coords(p.numel(), options.max_coords_per_tensor, rng)) {
      const double original = values[coord];
      values[coord] = original + options.step;
      const double up = evaluate(forward);
      values[coord] = original - options.step;
      const double down = evaluate(forward);
      values[coord] = original;

      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[coord];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++report.coords_checked;
      if (err > report.max_rel_error || report.coords_checked == 1) {
        report.max_rel_error = err;
        report.worst_param = pi;
        report.worst_coord = coord;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace triq
