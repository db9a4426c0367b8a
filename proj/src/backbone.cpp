#include "triq/backbone.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "container_io.hpp"
#include "triq/error.hpp"
#include "triq/ops.hpp"
#include "triq/random.hpp"

namespace triq {
namespace {

constexpr std::string_view kFeatureMagic = "TRIQFMAP";

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// He-style fan-in initialisation; biases start at zero.
ConvLayer make_conv(std::size_t k, std::size_t cin, std::size_t cout, std::size_t stride, std::size_t pad,
                    Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(k * k * cin));
  return ConvLayer{random_normal({k, k, cin, cout}, stddev, rng), Tensor::zeros({cout}, true), stride, pad};
}

Tensor apply(const ConvLayer& layer, const Tensor& x, GradTape* tape) {
  return ops::add_bias(ops::conv2d(x, layer.kernel, layer.stride, layer.pad, tape), layer.bias, tape);
}

void append(std::vector<NamedTensor>& out, const std::string& prefix, const ConvLayer& layer) {
  out.push_back({prefix + ".kernel", layer.kernel});
  out.push_back({prefix + ".bias", layer.bias});
}

}  // namespace

void BackboneConfig::validate() const {
  for (std::size_t c : stage_channels) {
    if (c == 0) throw ParameterError("backbone stage channels must be positive");
  }
  if (blocks_per_stage == 0) throw ParameterError("backbone needs at least one block per stage");
}

void FeatureMap::validate() const {
  if (!grid.defined() || grid.rank() != 3) throw FormatError("feature map grid must be [h, w, C]");
  if (source_height == 0 || source_width == 0) throw FormatError("feature map source size must be positive");
  if (height() != ceil_div(source_height, kBackboneStride) || width() != ceil_div(source_width, kBackboneStride)) {
    throw FormatError("feature grid " + shape_to_string(grid.shape()) + " inconsistent with source " +
                      std::to_string(source_height) + "x" + std::to_string(source_width));
  }
}

Backbone Backbone::build(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Backbone b;
  b.config_ = config;
  const auto& ch = config.stage_channels;
  b.stem_ = make_conv(3, 3, ch[0], 2, 1, rng);
  for (std::size_t stage = 1; stage < ch.size(); ++stage) {
    for (std::size_t i = 0; i < config.blocks_per_stage; ++i) {
      const bool first = i == 0;
      const std::size_t cin = first ? ch[stage - 1] : ch[stage];
      const std::size_t stride = first ? 2 : 1;
      ResidualBlock block;
      block.conv1 = make_conv(3, cin, ch[stage], stride, 1, rng);
      block.conv2 = make_conv(3, ch[stage], ch[stage], 1, 1, rng);
      if (first) block.projection = make_conv(1, cin, ch[stage], 2, 0, rng);
      b.blocks_.push_back(std::move(block));
    }
  }
  return b;
}

Tensor Backbone::prepare_input(const Tensor& image, GradTape* tape) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw FormatError("backbone expects an [H, W, 3] image, got " + shape_to_string(image.shape()));
  }
  const std::size_t h = ceil_div(image.dim(0), kBackboneStride) * kBackboneStride;
  const std::size_t w = ceil_div(image.dim(1), kBackboneStride) * kBackboneStride;
  if (h == image.dim(0) && w == image.dim(1)) return image;
  return ops::pad_bottom_right(image, h, w, tape);
}

FeatureMap Backbone::extract_features(const Tensor& image, GradTape* tape) const {
  Tensor x = prepare_input(image, tape);
  x = ops::gelu(apply(stem_, x, tape), tape);
  for (const ResidualBlock& block : blocks_) {
    Tensor h = ops::gelu(apply(block.conv1, x, tape), tape);
    h = apply(block.conv2, h, tape);
    const Tensor shortcut = block.projection ? apply(*block.projection, x, tape) : x;
    x = ops::gelu(ops::add(h, shortcut, tape), tape);
  }
  FeatureMap fm{x, image.dim(0), image.dim(1)};
  fm.validate();
  return fm;
}

std::vector<NamedTensor> Backbone::named_parameters() const {
  std::vector<NamedTensor> out;
  append(out, "backbone.stem", stem_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string prefix = "backbone.block" + std::to_string(i);
    append(out, prefix + ".conv1", blocks_[i].conv1);
    append(out, prefix + ".conv2", blocks_[i].conv2);
    if (blocks_[i].projection) append(out, prefix + ".projection", *blocks_[i].projection);
  }
  return out;
}

std::size_t Backbone::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named_parameters()) n += p.tensor.numel();
  return n;
}

void save_feature_map(const std::filesystem::path& path, const FeatureMap& fm) {
  fm.validate();
  const nlohmann::json header = {{"source_height", fm.source_height},
                                 {"source_width", fm.source_width},
                                 {"h", fm.height()},
                                 {"w", fm.width()},
                                 {"c", fm.channels()}};
  detail::ContainerWriter writer(path, kFeatureMagic, header.dump());
  writer.write_doubles(fm.grid.data());
  writer.close();
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("feature map not found: " + path.string());
  detail::ContainerReader reader(path, kFeatureMagic);
  std::size_t h = 0, w = 0, c = 0, sh = 0, sw = 0;
  try {
    const auto header = nlohmann::json::parse(reader.header());
    h = header.at("h").get<std::size_t>();
    w = header.at("w").get<std::size_t>();
    c = header.at("c").get<std::size_t>();
    sh = header.at("source_height").get<std::size_t>();
    sw = header.at("source_width").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad feature header: " + e.what());
  }
  if (h == 0 || w == 0 || c == 0) throw FormatError(path.string() + ": empty feature grid");
  FeatureMap fm{Tensor({h, w, c}, reader.read_doubles(h * w * c)), sh, sw};
  reader.expect_end();
  fm.validate();
  return fm;
}

}  // namespace triq
