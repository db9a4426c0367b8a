#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "triq/backbone.hpp"
#include "triq/random.hpp"
#include "triq/tensor.hpp"

namespace triq {

/// ACR grades 1 (bad) .. 5 (excellent).
inline constexpr std::size_t kGrades = 5;

/// Probabilities over the five grades.
struct QualityDistribution {
  std::array<double, kGrades> p{};

  static QualityDistribution uniform();
  static QualityDistribution one_hot(int grade);
  static QualityDistribution from_tensor(const Tensor& probs);

  /// True when every p(x) is in [0,1] and the sum is within `tol` of 1.
  bool valid(double tol = 1e-9) const;
  std::span<const double> values() const { return p; }
};

/// Expected grade, sum_x x * p(x). ContractError on an invalid distribution.
double mos_from_distribution(const QualityDistribution& d);

/// -sum_x target(x) * ln(max(pred(x), 1e-12)).
double cross_entropy(const QualityDistribution& pred, const QualityDistribution& target);

struct HeadConfig {
  std::size_t ff_dim = 64;
  double dropout_rate = 0.1;

  void validate() const;
};

/// Two fully connected layers with dropout in between and a 5-way softmax.
class QualityHead {
 public:
  static QualityHead build(std::size_t model_dim, const HeadConfig& config, std::uint64_t seed);

  const HeadConfig& config() const { return config_; }

  /// Probabilities as a [5] tensor. `z0` is row 0 of the encoder output,
  /// shaped [D] or [1, D]. Dropout is applied only when `training` is set;
  /// `rng` may be null at inference.
  Tensor forward(const Tensor& z0, bool training, Rng* rng, GradTape* tape = nullptr) const;

  QualityDistribution predict_distribution(const Tensor& z0, bool training = false, Rng* rng = nullptr) const;

  std::vector<NamedTensor> named_parameters() const;

 private:
  HeadConfig config_;
  Tensor fc1_w_, fc1_b_;  // [D, d_ff], [d_ff]
  Tensor fc2_w_, fc2_b_;  // [d_ff, 5], [5]
};

}  // namespace triq
