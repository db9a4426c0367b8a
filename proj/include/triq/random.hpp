#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "triq/tensor.hpp"

namespace triq {

using Rng = std::mt19937_64;

/// Derives an independent sub-seed for a named consumer ("init", "dropout",
/// "split", ...) so each source of randomness can be reproduced in isolation.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

/// Zero-mean Gaussian tensor.
Tensor random_normal(Shape shape, double stddev, Rng& rng, bool requires_grad = true);

}  // namespace triq
