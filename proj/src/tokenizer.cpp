#include "triq/tokenizer.hpp"

#include <array>
#include <cmath>

#include "triq/error.hpp"
#include "triq/ops.hpp"
#include "triq/random.hpp"

namespace triq {
namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

constexpr double kEmbeddingInitStd = 0.02;

}  // namespace

std::string to_string(ProjectionMode mode) { return mode == ProjectionMode::Patch ? "patch" : "hybrid"; }

ProjectionMode parse_projection_mode(const std::string& text) {
  if (text == "hybrid") return ProjectionMode::Hybrid;
  if (text == "patch") return ProjectionMode::Patch;
  throw ParameterError("unknown projection mode '" + text + "' (expected hybrid or patch)");
}

void ProjectionConfig::validate() const {
  if (patch_size == 0) throw ParameterError("patch_size must be positive");
  if (model_dim == 0) throw ParameterError("model dimension must be positive");
  if (n_max_tokens == 0) throw ParameterError("n_max_tokens must be positive");
}

std::size_t pool_size(std::size_t grid_h, std::size_t grid_w, std::size_t n_max_tokens) {
  if (n_max_tokens < 1) throw ParameterError("pool_size: n_max_tokens must be at least 1");
  if (grid_h == 0 || grid_w == 0) throw ParameterError("pool_size: grid extents must be positive");
  // ceil(h/P)*ceil(w/P) >= h*w/P^2, so no P below sqrt(h*w/n_max) can fit.
  const double area = static_cast<double>(grid_h) * static_cast<double>(grid_w);
  auto p = static_cast<std::size_t>(std::sqrt(area / static_cast<double>(n_max_tokens)));
  p = p > 1 ? p - 1 : 1;
  while (ceil_div(grid_h, p) * ceil_div(grid_w, p) > n_max_tokens) ++p;
  return p;
}

Tensor project_hybrid(const FeatureMap& fm, const Projection& proj, std::size_t pool, GradTape* tape) {
  if (proj.kernel_size() != 1) throw DimensionError("hybrid projection needs a 1x1 kernel");
  if (proj.kernel.dim(2) != fm.channels()) {
    throw DimensionError("projection expects " + std::to_string(proj.kernel.dim(2)) + " channels, feature map has " +
                         std::to_string(fm.channels()));
  }
  const Tensor pooled = ops::maxpool2d(fm.grid, pool, tape);
  return ops::add_bias(ops::conv2d(pooled, proj.kernel, 1, 0, tape), proj.bias, tape);
}

Tensor project_patches(const Tensor& image, const Projection& proj, std::size_t pool, GradTape* tape) {
  if (image.rank() != 3) throw DimensionError("patch projection expects an [H, W, C] image");
  const std::size_t patch = proj.kernel_size();
  const std::size_t h = ceil_div(image.dim(0), patch) * patch;
  const std::size_t w = ceil_div(image.dim(1), patch) * patch;
  const Tensor padded = (h == image.dim(0) && w == image.dim(1)) ? image : ops::pad_bottom_right(image, h, w, tape);
  const Tensor projected = ops::add_bias(ops::conv2d(padded, proj.kernel, patch, 0, tape), proj.bias, tape);
  return ops::maxpool2d(projected, pool, tape);
}

TokenSequence assemble_sequence(const Tensor& grid, const QualityToken& token, const PositionalEmbedding& pe,
                                GradTape* tape) {
  if (grid.rank() != 3) throw DimensionError("assemble_sequence: grid must be [gh, gw, D]");
  const std::size_t gh = grid.dim(0), gw = grid.dim(1), d = grid.dim(2);
  const std::size_t n = gh * gw;
  if (pe.table.rank() != 2 || pe.table.dim(1) != d || token.vector.shape() != Shape{d}) {
    throw DimensionError("assemble_sequence: embedding width does not match grid depth " + std::to_string(d));
  }
  if (n > pe.max_tokens()) {
    throw BudgetError("sequence of " + std::to_string(n) + " tokens exceeds the positional table (" +
                      std::to_string(pe.max_tokens()) + ")");
  }
  const std::array<Tensor, 2> parts{ops::reshape(token.vector, {1, d}, tape), ops::reshape(grid, {n, d}, tape)};
  const Tensor features = ops::concat_rows(parts, tape);
  const Tensor positions = pe.table.dim(0) == n + 1 ? pe.table : ops::slice_rows(pe.table, 0, n + 1, tape);
  return TokenSequence{ops::add(features, positions, tape), gh, gw};
}

Tokenizer Tokenizer::build(const ProjectionConfig& config, std::size_t in_channels, std::uint64_t seed) {
  config.validate();
  if (in_channels == 0) throw ParameterError("projection input channels must be positive");
  Rng rng(seed);
  Tokenizer t;
  t.config_ = config;
  const std::size_t k = config.kernel_size();
  const std::size_t fan_in = k * k * in_channels;
  // Glorot-uniform-equivalent variance for the projection kernel.
  const double proj_std = std::sqrt(2.0 / static_cast<double>(fan_in + config.model_dim));
  t.projection_ = Projection{random_normal({k, k, in_channels, config.model_dim}, proj_std, rng),
                             Tensor::zeros({config.model_dim}, true)};
  t.pe_ = PositionalEmbedding{random_normal({config.n_max_tokens + 1, config.model_dim}, kEmbeddingInitStd, rng)};
  t.token_ = QualityToken{Tensor::zeros({config.model_dim}, true)};
  return t;
}

std::size_t Tokenizer::pool_for(std::size_t grid_h, std::size_t grid_w) const {
  return pool_size(grid_h, grid_w, config_.n_max_tokens);
}

TokenSequence Tokenizer::tokenize_features(const FeatureMap& fm, GradTape* tape) const {
  if (config_.mode != ProjectionMode::Hybrid) throw ContractError("feature maps need a hybrid-mode tokenizer");
  const std::size_t p = pool_for(fm.height(), fm.width());
  return assemble_sequence(project_hybrid(fm, projection_, p, tape), token_, pe_, tape);
}

TokenSequence Tokenizer::tokenize_image(const Tensor& image, GradTape* tape) const {
  if (config_.mode != ProjectionMode::Patch) throw ContractError("raw images need a patch-mode tokenizer");
  const std::size_t patch = config_.patch_size;
  const std::size_t p = pool_for(ceil_div(image.dim(0), patch), ceil_div(image.dim(1), patch));
  return assemble_sequence(project_patches(image, projection_, p, tape), token_, pe_, tape);
}

std::vector<NamedTensor> Tokenizer::named_parameters() const {
  return {{"tokenizer.projection.kernel", projection_.kernel},
          {"tokenizer.projection.bias", projection_.bias},
          {"tokenizer.positional_embedding", pe_.table},
          {"tokenizer.quality_token", token_.vector}};
}

}  // namespace triq
