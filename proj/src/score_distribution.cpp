#include <algorithm>
#include <cmath>
#include <numbers>

#include "triq/dataio.hpp"
#include "triq/error.hpp"

namespace triq {
namespace {

// Phi(b) - Phi(a) for standard-normal z-scores, evaluated on whichever tail
// keeps the subtraction free of cancellation.
double normal_mass(double a, double b) {
  const auto upper = [](double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); };  // 1 - Phi(z)
  if (a >= 0.0) return upper(a) - upper(b);
  if (b <= 0.0) return upper(-b) - upper(-a);
  return 1.0 - upper(b) - upper(-a);
}

constexpr double kGradeLo = 1.0;
constexpr double kGradeHi = 5.0;

}  // namespace

QualityDistribution discretize_truncated_gaussian(double mu, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("truncated Gaussian needs sigma > 0");
  if (!(mu >= kGradeLo && mu <= kGradeHi)) throw RangeError("truncated Gaussian mean must lie in [1, 5]");
  QualityDistribution d;
  double total = 0.0;
  for (std::size_t i = 0; i < kGrades; ++i) {
    const double grade = static_cast<double>(i + 1);
    const double lo = std::max(kGradeLo, grade - 0.5);
    const double hi = std::min(kGradeHi, grade + 0.5);
    d.p[i] = normal_mass((lo - mu) / sigma, (hi - mu) / sigma);
    total += d.p[i];
  }
  if (!(total > 0.0)) throw NumericError("truncated Gaussian has no mass on [1, 5]");
  for (double& v : d.p) v /= total;
  return d;
}

QualityDistribution DatasetRecord::target_distribution() const {
  if (distribution) return *distribution;
  if (score_std) return discretize_truncated_gaussian(mos, *score_std);
  throw ContractError("record " + image_ref.string() + " has neither p1..p5 nor std");
}

}  // namespace triq
