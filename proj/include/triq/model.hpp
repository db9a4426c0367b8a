#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "triq/backbone.hpp"
#include "triq/encoder.hpp"
#include "triq/quality_head.hpp"
#include "triq/tokenizer.hpp"

namespace triq {

/// What a hybrid model consumes: raw images run through the built-in
/// backbone, or feature maps imported from an external CNN.
enum class InputKind { Image, Features };

std::string to_string(InputKind kind);
InputKind parse_input_kind(const std::string& text);

struct ModelConfig {
  InputKind input = InputKind::Image;
  /// Feature depth expected from imported feature maps (InputKind::Features).
  std::size_t feature_channels = 2048;
  BackboneConfig backbone;
  ProjectionConfig projection;
  EncoderConfig encoder;
  HeadConfig head;

  /// Checks the sub-configs and the couplings between them (D shared by
  /// projection and encoder, head width equal to d_ff).
  void validate() const;
};

/// An image [H, W, 3] with values in [0, 1], or a precomputed feature map.
using ModelInput = std::variant<Tensor, FeatureMap>;

struct ForwardResult {
  Tensor probs;  // [5]
  AttentionWeights attention;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  /// Exact tensor fed to the backbone (undefined when the backbone did not run).
  Tensor backbone_input;
};

/// Backbone (or imported features) -> tokenizer -> encoder -> quality head.
class TriqModel {
 public:
  static TriqModel build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::optional<Backbone>& backbone() const { return backbone_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const Encoder& encoder() const { return encoder_; }
  const QualityHead& head() const { return head_; }

  TokenSequence tokenize(const ModelInput& input, GradTape* tape, Tensor* backbone_input = nullptr) const;

  ForwardResult forward(const ModelInput& input, bool training = false, Rng* dropout_rng = nullptr,
                        GradTape* tape = nullptr) const;

  /// Dropout-free deterministic prediction.
  QualityDistribution predict(const ModelInput& input) const;

  /// Declared parameter order, used by checkpoints and the optimizer.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  void zero_grad() const;

 private:
  ModelConfig config_;
  std::optional<Backbone> backbone_;
  Tokenizer tokenizer_;
  Encoder encoder_;
  QualityHead head_;
};

}  // namespace triq
