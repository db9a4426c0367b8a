#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "triq/model.hpp"
#include "triq/trainer.hpp"

namespace triq {

/// Everything a CLI run needs, read from an INI-style file:
///
///   [model]  input, mode, patch_size, D, L, n_heads, d_ff, dropout, n_max_tokens,
///            feature_channels, backbone_channels, backbone_blocks
///   [train]  base_lr, finetune_lr, warmup_fraction, total_steps, beta1,
///            beta2, eps_adam, eval_every, accumulation
///   [data]   train_manifest, eval_manifest, seed
///
/// Missing keys keep their defaults; unknown sections or keys are rejected.
/// The head width follows d_ff and the projection width follows D.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path train_manifest;
  std::filesystem::path eval_manifest;
  std::uint64_t seed = 0;

  /// Applies one `section.key = value` assignment (ParameterError on unknown
  /// keys or malformed values).
  void set(const std::string& dotted_key, const std::string& value);
  void validate() const;

  std::string to_ini() const;
};

/// Applies the file's assignments on top of `base`.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
RunConfig parse_run_config(const std::string& text, RunConfig base = {});

}  // namespace triq
