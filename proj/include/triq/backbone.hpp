#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "triq/tensor.hpp"

namespace triq {

/// Every network stage halves the resolution; five of them give stride 32.
inline constexpr std::size_t kBackboneStride = 32;

struct BackboneConfig {
  std::array<std::size_t, 5> stage_channels{16, 32, 64, 128, 256};
  std::size_t blocks_per_stage = 1;

  void validate() const;
};

/// Spatial CNN output grid [h, w, C] plus the pixel size of the image it came from.
struct FeatureMap {
  Tensor grid;
  std::size_t source_height = 0;
  std::size_t source_width = 0;

  std::size_t height() const { return grid.dim(0); }
  std::size_t width() const { return grid.dim(1); }
  std::size_t channels() const { return grid.dim(2); }

  /// Throws FormatError unless h == ceil(H/32) and w == ceil(W/32).
  void validate() const;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ConvLayer {
  Tensor kernel;  // [k, k, c_in, c_out]
  Tensor bias;    // [c_out]
  std::size_t stride = 1;
  std::size_t pad = 0;
};

struct ResidualBlock {
  ConvLayer conv1;
  ConvLayer conv2;
  std::optional<ConvLayer> projection;  // 1x1 shortcut when shape changes
};

/// Residual micro-network: a stride-2 3x3 stem followed by four stride-2
/// stages of residual blocks (two 3x3 convolutions each, GELU activations).
class Backbone {
 public:
  static Backbone build(const BackboneConfig& config, std::uint64_t seed);

  const BackboneConfig& config() const { return config_; }
  std::size_t out_channels() const { return config_.stage_channels.back(); }

  /// Zero-pads an [H, W, 3] image on the bottom/right to multiples of 32.
  /// This is the exact tensor the convolution stack consumes; no rescaling.
  static Tensor prepare_input(const Tensor& image, GradTape* tape = nullptr);

  FeatureMap extract_features(const Tensor& image, GradTape* tape = nullptr) const;

  std::vector<NamedTensor> named_parameters() const;
  std::size_t parameter_count() const;

 private:
  BackboneConfig config_;
  ConvLayer stem_;
  std::vector<ResidualBlock> blocks_;
};

/// Writes the "TRIQFMAP" feature container.
void save_feature_map(const std::filesystem::path& path, const FeatureMap& fm);
FeatureMap load_feature_map(const std::filesystem::path& path);

}  // namespace triq
