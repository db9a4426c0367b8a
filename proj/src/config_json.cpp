#include "triq/config_json.hpp"

#include <set>

#include "triq/error.hpp"

namespace triq {
namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw FormatError("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"input", to_string(c.input)},
          {"feature_channels", c.feature_channels},
          {"backbone", {{"stage_channels", c.backbone.stage_channels}, {"blocks_per_stage", c.backbone.blocks_per_stage}}},
          {"projection",
           {{"mode", to_string(c.projection.mode)},
            {"patch_size", c.projection.patch_size},
            {"model_dim", c.projection.model_dim},
            {"n_max_tokens", c.projection.n_max_tokens}}},
          {"encoder",
           {{"L", c.encoder.layers},
            {"D", c.encoder.model_dim},
            {"H", c.encoder.heads},
            {"d_ff", c.encoder.ff_dim},
            {"ln_eps", c.encoder.ln_eps}}},
          {"head", {{"d_ff", c.head.ff_dim}, {"dropout", c.head.dropout_rate}}}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    reject_unknown(j, {"input", "feature_channels", "backbone", "projection", "encoder", "head"}, "model");
    if (j.contains("input")) c.input = parse_input_kind(j.at("input").get<std::string>());
    read(j, "feature_channels", c.feature_channels);
    if (j.contains("backbone")) {
      const auto& b = j.at("backbone");
      reject_unknown(b, {"stage_channels", "blocks_per_stage"}, "model.backbone");
      read(b, "stage_channels", c.backbone.stage_channels);
      read(b, "blocks_per_stage", c.backbone.blocks_per_stage);
    }
    if (j.contains("projection")) {
      const auto& p = j.at("projection");
      reject_unknown(p, {"mode", "patch_size", "model_dim", "n_max_tokens"}, "model.projection");
      if (p.contains("mode")) c.projection.mode = parse_projection_mode(p.at("mode").get<std::string>());
      read(p, "patch_size", c.projection.patch_size);
      read(p, "model_dim", c.projection.model_dim);
      read(p, "n_max_tokens", c.projection.n_max_tokens);
    }
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      reject_unknown(e, {"L", "D", "H", "d_ff", "ln_eps"}, "model.encoder");
      read(e, "L", c.encoder.layers);
      read(e, "D", c.encoder.model_dim);
      read(e, "H", c.encoder.heads);
      read(e, "d_ff", c.encoder.ff_dim);
      read(e, "ln_eps", c.encoder.ln_eps);
    }
    if (j.contains("head")) {
      const auto& h = j.at("head");
      reject_unknown(h, {"d_ff", "dropout"}, "model.head");
      read(h, "d_ff", c.head.ff_dim);
      read(h, "dropout", c.head.dropout_rate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"base_lr", c.base_lr},     {"finetune_lr", c.finetune_lr}, {"warmup_fraction", c.warmup_fraction},
          {"total_steps", c.total_steps}, {"beta1", c.beta1},         {"beta2", c.beta2},
          {"eps_adam", c.eps_adam},   {"seed", c.seed},               {"eval_every", c.eval_every},
          {"accumulation", c.accumulation}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    reject_unknown(j,
                   {"base_lr", "finetune_lr", "warmup_fraction", "total_steps", "beta1", "beta2", "eps_adam", "seed",
                    "eval_every", "accumulation"},
                   "train");
    read(j, "base_lr", c.base_lr);
    read(j, "finetune_lr", c.finetune_lr);
    read(j, "warmup_fraction", c.warmup_fraction);
    read(j, "total_steps", c.total_steps);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "eps_adam", c.eps_adam);
    read(j, "seed", c.seed);
    read(j, "eval_every", c.eval_every);
    read(j, "accumulation", c.accumulation);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad train config: ") + e.what());
  }
  return c;
}

}  // namespace triq
