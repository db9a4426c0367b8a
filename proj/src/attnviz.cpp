#include "triq/attnviz.hpp"

#include <algorithm>
#include <cmath>

#include "triq/error.hpp"

namespace triq {
namespace {

// Quality-token row of one layer, head-averaged, as a flat gh*gw vector.
std::vector<double> token_relevance(const Tensor& layer, std::size_t n_tokens) {
  if (layer.rank() != 3 || layer.dim(1) != n_tokens + 1 || layer.dim(2) != n_tokens + 1) {
    throw DimensionError("attention map " + shape_to_string(layer.shape()) + " does not match a grid of " +
                         std::to_string(n_tokens) + " tokens");
  }
  const std::size_t heads = layer.dim(0), t = n_tokens + 1;
  std::vector<double> out(n_tokens, 0.0);
  auto a = layer.data();
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t j = 0; j < n_tokens; ++j) out[j] += a[h * t * t + (j + 1)];
  }
  for (double& v : out) v /= static_cast<double>(heads);
  return out;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& grid, std::size_t out_h, std::size_t out_w) {
  if (grid.rank() != 2) throw DimensionError("bilinear_upsample expects an [h, w] grid");
  if (out_h == 0 || out_w == 0) throw DimensionError("bilinear_upsample: empty output");
  const std::size_t h = grid.dim(0), w = grid.dim(1);
  auto g = grid.data();
  const auto source = [](std::size_t dst, std::size_t in, std::size_t out, std::size_t& i0, std::size_t& i1,
                         double& frac) {
    const double pos = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    const double clamped = std::clamp(pos, 0.0, static_cast<double>(in - 1));
    i0 = static_cast<std::size_t>(std::floor(clamped));
    i1 = std::min(i0 + 1, in - 1);
    frac = clamped - static_cast<double>(i0);
  };
  Tensor out({out_h, out_w});
  auto o = out.data_mut();
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double fy;
    source(y, h, out_h, y0, y1, fy);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double fx;
      source(x, w, out_w, x0, x1, fx);
      const double top = g[y0 * w + x0] * (1.0 - fx) + g[y0 * w + x1] * fx;
      const double bottom = g[y1 * w + x0] * (1.0 - fx) + g[y1 * w + x1] * fx;
      o[y * out_w + x] = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

AttentionMask attention_mask(const AttentionWeights& weights, LayerSelect select, std::size_t grid_h,
                             std::size_t grid_w, std::size_t image_h, std::size_t image_w) {
  if (weights.layers.empty()) throw DimensionError("no attention layers to visualise");
  const std::size_t n = grid_h * grid_w;
  if (n == 0) throw DimensionError("empty token grid");

  AttentionMask mask;
  std::vector<double> relevance(n, 0.0);
  if (select.index) {
    if (*select.index >= weights.layers.size()) {
      throw ParameterError("layer " + std::to_string(*select.index) + " out of range (model has " +
                           std::to_string(weights.layers.size()) + ")");
    }
    relevance = token_relevance(weights.layers[*select.index], n);
    mask.layer_used = std::to_string(*select.index);
  } else {
    for (const Tensor& layer : weights.layers) {
      const auto r = token_relevance(layer, n);
      for (std::size_t j = 0; j < n; ++j) relevance[j] += r[j];
    }
    for (double& v : relevance) v /= static_cast<double>(weights.layers.size());
    mask.layer_used = "mean";
  }

  const auto [lo_it, hi_it] = std::minmax_element(relevance.begin(), relevance.end());
  const double lo = *lo_it, hi = *hi_it;
  for (double& v : relevance) v = hi > lo ? (v - lo) / (hi - lo) : 1.0;

  Tensor values = bilinear_upsample(Tensor({grid_h, grid_w}, std::move(relevance)), image_h, image_w);
  for (double& v : values.data_mut()) v = std::clamp(v, 0.0, 1.0);
  mask.values = std::move(values);
  return mask;
}

Tensor overlay(const Tensor& image, const AttentionMask& mask, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("overlay alpha must lie in [0, 1]");
  if (image.rank() != 3 || mask.values.rank() != 2 || image.dim(0) != mask.values.dim(0) ||
      image.dim(1) != mask.values.dim(1)) {
    throw DimensionError("overlay: image " + shape_to_string(image.shape()) + " vs mask " +
                         shape_to_string(mask.values.shape()));
  }
  const std::size_t c = image.dim(2);
  Tensor out(image.shape());
  auto o = out.data_mut();
  auto in = image.data();
  auto m = mask.values.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double factor = alpha + (1.0 - alpha) * m[i];
    for (std::size_t ch = 0; ch < c; ++ch) o[i * c + ch] = in[i * c + ch] * factor;
  }
  return out;
}

}  // namespace triq
