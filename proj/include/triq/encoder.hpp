#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "triq/backbone.hpp"
#include "triq/tensor.hpp"
#include "triq/tokenizer.hpp"

namespace triq {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t model_dim = 32;
  std::size_t heads = 8;
  std::size_t ff_dim = 64;
  double ln_eps = 1e-6;

  std::size_t head_dim() const { return model_dim / heads; }
  void validate() const;
};

struct AttentionParams {
  Tensor wq, bq;  // [D, D], [D]; head h owns columns h*d_k .. (h+1)*d_k
  Tensor wk;      // no bias: q.b_k is constant along each softmax row, so it would be inert
  Tensor wv, bv;
  Tensor wo, bo;
};

struct EncoderLayerParams {
  AttentionParams attention;
  Tensor ln1_gamma, ln1_beta;
  Tensor ff1_w, ff1_b;  // [D, d_ff], [d_ff]
  Tensor ff2_w, ff2_b;  // [d_ff, D], [D]
  Tensor ln2_gamma, ln2_beta;
};

/// Softmax attention maps, one [heads, 1+N, 1+N] tensor per layer. These are
/// detached copies for inspection; they do not carry gradients.
struct AttentionWeights {
  std::vector<Tensor> layers;
};

struct AttentionResult {
  Tensor output;   // [1+N, D]
  Tensor weights;  // [heads, 1+N, 1+N]
};

/// Scaled dot-product attention per head on Z·W + b projections, heads
/// concatenated and mixed by the output matrix.
AttentionResult multi_head_attention(const Tensor& z, const AttentionParams& params, std::size_t heads,
                                     GradTape* tape = nullptr);

/// Post-norm layer: Z' = LN(MHA(Z) + Z), Z_next = LN(FF(Z') + Z').
AttentionResult encoder_layer(const Tensor& z, const EncoderLayerParams& params, const EncoderConfig& config,
                              GradTape* tape = nullptr);

struct EncodeResult {
  Tensor output;  // [1+N, D]
  AttentionWeights attention;
};

class Encoder {
 public:
  static Encoder build(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  const std::vector<EncoderLayerParams>& layers() const { return layers_; }

  EncodeResult encode(const Tensor& sequence, GradTape* tape = nullptr) const;
  EncodeResult encode(const TokenSequence& sequence, GradTape* tape = nullptr) const {
    return encode(sequence.rows, tape);
  }

  std::vector<NamedTensor> named_parameters() const;

 private:
  EncoderConfig config_;
  std::vector<EncoderLayerParams> layers_;
};

}  // namespace triq
