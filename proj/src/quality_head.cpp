#include "triq/quality_head.hpp"

#include <algorithm>
#include <cmath>

#include "triq/error.hpp"
#include "triq/ops.hpp"

namespace triq {

QualityDistribution QualityDistribution::uniform() {
  QualityDistribution d;
  d.p.fill(1.0 / static_cast<double>(kGrades));
  return d;
}

QualityDistribution QualityDistribution::one_hot(int grade) {
  if (grade < 1 || grade > static_cast<int>(kGrades)) throw RangeError("grade must be in 1..5");
  QualityDistribution d;
  d.p[static_cast<std::size_t>(grade - 1)] = 1.0;
  return d;
}

QualityDistribution QualityDistribution::from_tensor(const Tensor& probs) {
  if (probs.numel() != kGrades) throw DimensionError("quality distribution needs 5 values");
  QualityDistribution d;
  std::copy(probs.data().begin(), probs.data().end(), d.p.begin());
  return d;
}

bool QualityDistribution::valid(double tol) const {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= tol;
}

double mos_from_distribution(const QualityDistribution& d) {
  if (!d.valid()) throw ContractError("mos_from_distribution: not a probability distribution");
  double mos = 0.0;
  for (std::size_t i = 0; i < kGrades; ++i) mos += static_cast<double>(i + 1) * d.p[i];
  return std::clamp(mos, 1.0, 5.0);
}

double cross_entropy(const QualityDistribution& pred, const QualityDistribution& target) {
  double ce = 0.0;
  for (std::size_t i = 0; i < kGrades; ++i) {
    if (target.p[i] != 0.0) ce -= target.p[i] * std::log(std::max(pred.p[i], 1e-12));
  }
  return ce;
}

void HeadConfig::validate() const {
  if (ff_dim == 0) throw ParameterError("head hidden width must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ParameterError("dropout rate must lie in [0, 1)");
}

QualityHead QualityHead::build(std::size_t model_dim, const HeadConfig& config, std::uint64_t seed) {
  config.validate();
  if (model_dim == 0) throw ParameterError("model dimension must be positive");
  Rng rng(seed);
  QualityHead h;
  h.config_ = config;
  // Glorot-normal weights, zero biases.
  const auto glorot = [](std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  };
  h.fc1_w_ = random_normal({model_dim, config.ff_dim}, glorot(model_dim, config.ff_dim), rng);
  h.fc1_b_ = Tensor::zeros({config.ff_dim}, true);
  h.fc2_w_ = random_normal({config.ff_dim, kGrades}, glorot(config.ff_dim, kGrades), rng);
  h.fc2_b_ = Tensor::zeros({kGrades}, true);
  return h;
}

Tensor QualityHead::forward(const Tensor& z0, bool training, Rng* rng, GradTape* tape) const {
  const std::size_t d = fc1_w_.dim(0);
  if (z0.numel() != d) throw DimensionError("head input must hold " + std::to_string(d) + " values");
  const Tensor x = z0.rank() == 2 ? z0 : ops::reshape(z0, {1, d}, tape);
  Tensor hidden = ops::gelu(ops::add_bias(ops::matmul(x, fc1_w_, tape), fc1_b_, tape), tape);
  if (training && config_.dropout_rate > 0.0) {
    if (!rng) throw ContractError("training-mode dropout needs a random generator");
    hidden = ops::dropout(hidden, config_.dropout_rate, *rng, tape);
  }
  const Tensor logits = ops::add_bias(ops::matmul(hidden, fc2_w_, tape), fc2_b_, tape);
  return ops::reshape(ops::softmax(logits, tape), {kGrades}, tape);
}

QualityDistribution QualityHead::predict_distribution(const Tensor& z0, bool training, Rng* rng) const {
  return QualityDistribution::from_tensor(forward(z0, training, rng, nullptr));
}

std::vector<NamedTensor> QualityHead::named_parameters() const {
  return {{"head.fc1.w", fc1_w_}, {"head.fc1.b", fc1_b_}, {"head.fc2.w", fc2_w_}, {"head.fc2.b", fc2_b_}};
}

}  // namespace triq
