#include "triq/encoder.hpp"

#include <cmath>
#include <string>

#include "triq/error.hpp"
#include "triq/ops.hpp"
#include "triq/random.hpp"

namespace triq {
namespace {

constexpr double kInitStd = 0.02;

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b, GradTape* tape) {
  return ops::add_bias(ops::matmul(x, w, tape), b, tape);
}

}  // namespace

void EncoderConfig::validate() const {
  if (model_dim == 0 || heads == 0 || ff_dim == 0) throw ParameterError("encoder dimensions must be positive");
  if (model_dim % heads != 0) {
    throw ParameterError("model dimension " + std::to_string(model_dim) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  if (!(ln_eps > 0.0)) throw ParameterError("layer-norm eps must be positive");
}

AttentionResult multi_head_attention(const Tensor& z, const AttentionParams& params, std::size_t heads,
                                     GradTape* tape) {
  if (z.rank() != 2) throw DimensionError("attention input must be [tokens, D]");
  const std::size_t t = z.dim(0), d = z.dim(1);
  if (heads == 0 || d % heads != 0) throw DimensionError("model dimension not divisible by head count");
  if (params.wq.shape() != Shape{d, d}) throw DimensionError("attention weights do not match model dimension");
  const std::size_t dk = d / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  const Tensor q = linear(z, params.wq, params.bq, tape);
  const Tensor k = ops::matmul(z, params.wk, tape);
  const Tensor v = linear(z, params.wv, params.bv, tape);

  Tensor weights({heads, t, t});
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = ops::slice_cols(q, h * dk, dk, tape);
    const Tensor kh = ops::slice_cols(k, h * dk, dk, tape);
    const Tensor vh = ops::slice_cols(v, h * dk, dk, tape);
    const Tensor scores = ops::scale(ops::matmul(qh, ops::transpose(kh, tape), tape), inv_sqrt_dk, tape);
    const Tensor attn = ops::softmax(scores, tape);
    std::copy(attn.data().begin(), attn.data().end(), weights.data_mut().begin() + static_cast<std::ptrdiff_t>(h * t * t));
    head_outputs.push_back(ops::matmul(attn, vh, tape));
  }
  const Tensor merged = heads == 1 ? head_outputs.front() : ops::concat_cols(head_outputs, tape);
  return {linear(merged, params.wo, params.bo, tape), std::move(weights)};
}

AttentionResult encoder_layer(const Tensor& z, const EncoderLayerParams& p, const EncoderConfig& config,
                              GradTape* tape) {
  AttentionResult mha = multi_head_attention(z, p.attention, config.heads, tape);
  const Tensor mid = ops::layer_norm(ops::add(mha.output, z, tape), p.ln1_gamma, p.ln1_beta, config.ln_eps, tape);
  const Tensor hidden = ops::gelu(linear(mid, p.ff1_w, p.ff1_b, tape), tape);
  const Tensor ff = linear(hidden, p.ff2_w, p.ff2_b, tape);
  Tensor out = ops::layer_norm(ops::add(ff, mid, tape), p.ln2_gamma, p.ln2_beta, config.ln_eps, tape);
  return {std::move(out), std::move(mha.weights)};
}

Encoder Encoder::build(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t d = config.model_dim, f = config.ff_dim;
  auto weight = [&](std::size_t rows, std::size_t cols) { return random_normal({rows, cols}, kInitStd, rng); };
  auto zeros = [](std::size_t n) { return Tensor::zeros({n}, true); };
  auto ones = [](std::size_t n) { return Tensor::full({n}, 1.0, true); };

  Encoder e;
  e.config_ = config;
  for (std::size_t l = 0; l < config.layers; ++l) {
    EncoderLayerParams p;
    p.attention = AttentionParams{weight(d, d), zeros(d), weight(d, d), weight(d, d), zeros(d), weight(d, d), zeros(d)};
    p.ln1_gamma = ones(d);
    p.ln1_beta = zeros(d);
    p.ff1_w = weight(d, f);
    p.ff1_b = zeros(f);
    p.ff2_w = weight(f, d);
    p.ff2_b = zeros(d);
    p.ln2_gamma = ones(d);
    p.ln2_beta = zeros(d);
    e.layers_.push_back(std::move(p));
  }
  return e;
}

EncodeResult Encoder::encode(const Tensor& sequence, GradTape* tape) const {
  if (sequence.rank() != 2 || sequence.dim(1) != config_.model_dim) {
    throw DimensionError("encoder input must be [tokens, " + std::to_string(config_.model_dim) + "], got " +
                         shape_to_string(sequence.shape()));
  }
  EncodeResult result{sequence, {}};
  for (const EncoderLayerParams& layer : layers_) {
    AttentionResult r = encoder_layer(result.output, layer, config_, tape);
    result.output = std::move(r.output);
    result.attention.layers.push_back(std::move(r.weights));
  }
  return result;
}

std::vector<NamedTensor> Encoder::named_parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string pre = "encoder.layer" + std::to_string(l) + ".";
    const EncoderLayerParams& p = layers_[l];
    out.insert(out.end(), {{pre + "attention.wq", p.attention.wq},
                           {pre + "attention.bq", p.attention.bq},
                           {pre + "attention.wk", p.attention.wk},
                           {pre + "attention.wv", p.attention.wv},
                           {pre + "attention.bv", p.attention.bv},
                           {pre + "attention.wo", p.attention.wo},
                           {pre + "attention.bo", p.attention.bo},
                           {pre + "ln1.gamma", p.ln1_gamma},
                           {pre + "ln1.beta", p.ln1_beta},
                           {pre + "ff1.w", p.ff1_w},
                           {pre + "ff1.b", p.ff1_b},
                           {pre + "ff2.w", p.ff2_w},
                           {pre + "ff2.b", p.ff2_b},
                           {pre + "ln2.gamma", p.ln2_gamma},
                           {pre + "ln2.beta", p.ln2_beta}});
  }
  return out;
}

}  // namespace triq
