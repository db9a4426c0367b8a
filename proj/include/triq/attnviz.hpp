#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "triq/encoder.hpp"
#include "triq/tensor.hpp"

namespace triq {

/// Which encoder layer feeds the mask: a 0-based index, or the mean of all layers.
struct LayerSelect {
  std::optional<std::size_t> index;  // nullopt = mean over layers

  static LayerSelect mean() { return {}; }
  static LayerSelect layer(std::size_t i) { return {i}; }
};

struct AttentionMask {
  Tensor values;  // [H, W], every entry in [0, 1]
  std::string layer_used;  // layer index or "mean"
};

/// Quality-token relevance map: row 0 of the selected layer's attention
/// (columns 1..N), averaged over heads, reshaped to the token grid, min-max
/// normalised (all ones when flat) and bilinearly upsampled to the image
/// size with half-pixel centres and edge clamping.
AttentionMask attention_mask(const AttentionWeights& weights, LayerSelect select, std::size_t grid_h,
                             std::size_t grid_w, std::size_t image_h, std::size_t image_w);

/// Bilinear resize of an [h, w] grid (half-pixel centres, edges clamped).
Tensor bilinear_upsample(const Tensor& grid, std::size_t out_h, std::size_t out_w);

/// image * (alpha + (1 - alpha) * mask), broadcast over channels.
Tensor overlay(const Tensor& image, const AttentionMask& mask, double alpha = 0.2);

}  // namespace triq
