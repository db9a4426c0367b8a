#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "triq/backbone.hpp"
#include "triq/tensor.hpp"

namespace triq {

enum class ProjectionMode { Hybrid, Patch };

std::string to_string(ProjectionMode mode);
ProjectionMode parse_projection_mode(const std::string& text);

struct ProjectionConfig {
  ProjectionMode mode = ProjectionMode::Hybrid;
  std::size_t patch_size = 32;
  std::size_t model_dim = 32;
  std::size_t n_max_tokens = 768;

  /// Kernel size and stride of the projection convolution.
  std::size_t kernel_size() const { return mode == ProjectionMode::Patch ? patch_size : 1; }
  void validate() const;
};

/// Conv2D-projection: kernel [k, k, C, D] with k == stride, plus bias [D].
struct Projection {
  Tensor kernel;
  Tensor bias;

  std::size_t kernel_size() const { return kernel.dim(0); }
};

/// Learnable table of 1 + n_max_tokens rows; row 0 belongs to the quality token.
struct PositionalEmbedding {
  Tensor table;

  std::size_t max_tokens() const { return table.dim(0) - 1; }
};

/// Learnable extra embedding prepended to every sequence.
struct QualityToken {
  Tensor vector;  // [D]
};

struct TokenSequence {
  Tensor rows;  // [1 + N, D]
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  std::size_t tokens() const { return grid_h * grid_w; }
};

/// Smallest P with ceil(grid_h/P) * ceil(grid_w/P) <= n_max_tokens.
std::size_t pool_size(std::size_t grid_h, std::size_t grid_w, std::size_t n_max_tokens);

/// Hybrid mode: max-pool the feature map by P, then apply the 1x1 projection.
Tensor project_hybrid(const FeatureMap& fm, const Projection& proj, std::size_t pool, GradTape* tape = nullptr);

/// Patch mode: zero-pad the image to a multiple of the patch size, project
/// each patch (kernel == stride == patch size), then max-pool by P.
Tensor project_patches(const Tensor& image, const Projection& proj, std::size_t pool, GradTape* tape = nullptr);

/// Flattens the grid row-major and prepends the quality token, adding the
/// first 1 + N rows of the positional table. The table may be longer than
/// needed (truncation) but not shorter (BudgetError).
TokenSequence assemble_sequence(const Tensor& grid, const QualityToken& token, const PositionalEmbedding& pe,
                                GradTape* tape = nullptr);

class Tokenizer {
 public:
  /// `in_channels` is the feature-map depth in hybrid mode (3 in patch mode).
  static Tokenizer build(const ProjectionConfig& config, std::size_t in_channels, std::uint64_t seed);

  const ProjectionConfig& config() const { return config_; }
  const Projection& projection() const { return projection_; }
  const PositionalEmbedding& positional_embedding() const { return pe_; }
  const QualityToken& quality_token() const { return token_; }

  /// Pooled grid extents for a given pre-pooling grid.
  std::size_t pool_for(std::size_t grid_h, std::size_t grid_w) const;

  TokenSequence tokenize_features(const FeatureMap& fm, GradTape* tape = nullptr) const;
  TokenSequence tokenize_image(const Tensor& image, GradTape* tape = nullptr) const;

  std::vector<NamedTensor> named_parameters() const;

 private:
  ProjectionConfig config_;
  Projection projection_;
  PositionalEmbedding pe_;
  QualityToken token_;
};

}  // namespace triq
