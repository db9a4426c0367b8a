#include "triq/random.hpp"

namespace triq {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, mixed into the seed with a splitmix64 finalizer.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tensor random_normal(Shape shape, double stddev, Rng& rng, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data_mut()) v = dist(rng);
  return t;
}

}  // namespace triq
