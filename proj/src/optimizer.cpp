#include <cmath>
#include <numbers>

#include "triq/error.hpp"
#include "triq/trainer.hpp"

namespace triq {

void TrainConfig::validate() const {
  if (!(base_lr > 0.0)) throw ParameterError("base_lr must be positive");
  // finetune_lr == 0 is allowed: it runs the loop as a null update.
  if (!(finetune_lr >= 0.0)) throw ParameterError("finetune_lr must be non-negative");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) throw ParameterError("warmup_fraction must lie in (0, 1)");
  if (total_steps == 0) throw ParameterError("total_steps must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ParameterError("Adam betas must lie in [0, 1)");
  if (!(eps_adam >= 0.0)) throw ParameterError("Adam eps must be non-negative");
  if (eval_every == 0) throw ParameterError("eval_every must be positive");
  if (accumulation == 0) throw ParameterError("accumulation must be positive");
}

AdamState AdamState::for_params(std::span<const Tensor> params) {
  AdamState s;
  for (const Tensor& p : params) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamHyper& hyper) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].numel()) throw ContractError("adam_step: moment buffer shape mismatch");
    if (!params[i].has_grad()) continue;
    for (double g : params[i].grad()) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].data_mut();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const std::span<const double> g = params[i].has_grad() ? params[i].grad() : std::span<const double>();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      const double denom = std::sqrt(v_hat) + hyper.eps;
      // 0/0 only happens with eps == 0 and a gradient that has always been zero.
      if (denom > 0.0) w[j] -= lr * m_hat / denom;
    }
  }
}

double lr_at_step(std::size_t step, std::size_t total_steps, double base_lr, double warmup_fraction) {
  if (step > total_steps) throw ParameterError("lr_at_step: step beyond total_steps");
  const auto warmup = static_cast<std::size_t>(std::lround(warmup_fraction * static_cast<double>(total_steps)));
  if (warmup > 0 && (step <= warmup || total_steps <= warmup)) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double lr_at_step(std::size_t step, const TrainConfig& config) {
  return lr_at_step(step, config.total_steps, config.base_lr, config.warmup_fraction);
}

}  // namespace triq
