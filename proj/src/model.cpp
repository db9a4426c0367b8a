#include "triq/model.hpp"

#include "triq/error.hpp"
#include "triq/ops.hpp"
#include "triq/random.hpp"

namespace triq {

std::string to_string(InputKind kind) { return kind == InputKind::Features ? "features" : "image"; }

InputKind parse_input_kind(const std::string& text) {
  if (text == "image") return InputKind::Image;
  if (text == "features") return InputKind::Features;
  throw ParameterError("unknown model input '" + text + "' (expected image or features)");
}

void ModelConfig::validate() const {
  backbone.validate();
  projection.validate();
  encoder.validate();
  head.validate();
  if (projection.model_dim != encoder.model_dim) {
    throw ParameterError("projection and encoder must share the model dimension");
  }
  if (head.ff_dim != encoder.ff_dim) throw ParameterError("head hidden width must equal the encoder d_ff");
  if (input == InputKind::Features) {
    if (projection.mode != ProjectionMode::Hybrid) throw ParameterError("imported features need hybrid mode");
    if (feature_channels == 0) throw ParameterError("feature_channels must be positive");
  }
}

TriqModel TriqModel::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  TriqModel m;
  m.config_ = config;
  std::size_t in_channels = 3;
  if (config.projection.mode == ProjectionMode::Hybrid) {
    if (config.input == InputKind::Image) {
      m.backbone_ = Backbone::build(config.backbone, derive_seed(seed, "init.backbone"));
      in_channels = m.backbone_->out_channels();
    } else {
      in_channels = config.feature_channels;
    }
  }
  m.tokenizer_ = Tokenizer::build(config.projection, in_channels, derive_seed(seed, "init.tokenizer"));
  m.encoder_ = Encoder::build(config.encoder, derive_seed(seed, "init.encoder"));
  m.head_ = QualityHead::build(config.encoder.model_dim, config.head, derive_seed(seed, "init.head"));
  return m;
}

TokenSequence TriqModel::tokenize(const ModelInput& input, GradTape* tape, Tensor* backbone_input) const {
  if (const auto* fm = std::get_if<FeatureMap>(&input)) {
    return tokenizer_.tokenize_features(*fm, tape);
  }
  const Tensor& image = std::get<Tensor>(input);
  if (config_.projection.mode == ProjectionMode::Patch) return tokenizer_.tokenize_image(image, tape);
  if (!backbone_) throw ContractError("this model consumes feature maps, not images");
  if (backbone_input) *backbone_input = Backbone::prepare_input(image);
  return tokenizer_.tokenize_features(backbone_->extract_features(image, tape), tape);
}

ForwardResult TriqModel::forward(const ModelInput& input, bool training, Rng* dropout_rng, GradTape* tape) const {
  ForwardResult result;
  const TokenSequence seq = tokenize(input, tape, &result.backbone_input);
  EncodeResult enc = encoder_.encode(seq, tape);
  const Tensor z0 = ops::slice_rows(enc.output, 0, 1, tape);
  result.probs = head_.forward(z0, training, dropout_rng, tape);
  result.attention = std::move(enc.attention);
  result.grid_h = seq.grid_h;
  result.grid_w = seq.grid_w;
  return result;
}

QualityDistribution TriqModel::predict(const ModelInput& input) const {
  return QualityDistribution::from_tensor(forward(input).probs);
}

std::vector<NamedTensor> TriqModel::named_parameters() const {
  std::vector<NamedTensor> out;
  if (backbone_) out = backbone_->named_parameters();
  auto tok = tokenizer_.named_parameters();
  auto enc = encoder_.named_parameters();
  auto head = head_.named_parameters();
  out.insert(out.end(), tok.begin(), tok.end());
  out.insert(out.end(), enc.begin(), enc.end());
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

std::vector<Tensor> TriqModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

void TriqModel::zero_grad() const {
  for (Tensor p : parameters()) p.zero_grad();
}

}  // namespace triq
