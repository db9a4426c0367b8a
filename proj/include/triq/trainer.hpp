#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "triq/dataio.hpp"
#include "triq/metrics.hpp"
#include "triq/model.hpp"

namespace triq {

struct TrainConfig {
  double base_lr = 5e-5;
  double finetune_lr = 1e-6;
  double warmup_fraction = 0.1;
  std::size_t total_steps = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
  /// Records whose gradients are summed (and averaged) per optimizer step.
  std::size_t accumulation = 1;

  void validate() const;
};

/// Adam moment buffers, one per parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  static AdamState for_params(std::span<const Tensor> params);
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update from the gradients stored on `params`.
/// Parameters without a gradient are treated as having a zero gradient.
/// Throws NumericError (and leaves everything untouched) on a NaN/Inf gradient.
void adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamHyper& hyper = {});

/// Linear warm-up to `base_lr` over round(warmup_fraction * total_steps)
/// steps, then cosine decay to zero at `total_steps`.
double lr_at_step(std::size_t step, std::size_t total_steps, double base_lr, double warmup_fraction);
double lr_at_step(std::size_t step, const TrainConfig& config);

/// A decoded training/evaluation example.
struct Sample {
  std::string id;
  ModelInput input;
  /// Absent when the record has only a MOS; such samples can be evaluated
  /// but not trained on.
  std::optional<QualityDistribution> target;
  double mos = 3.0;
};

/// Loads every record of a manifest: images for image/patch models, and
/// `.fmap` feature containers for feature-input models.
std::vector<Sample> load_samples(const Manifest& manifest, const ModelConfig& config);

struct Evaluation {
  MetricReport metrics;
  std::vector<double> predicted_mos;
  /// Mean cross-entropy over samples that carry a target (NaN if none do).
  double mean_loss = 0.0;
};

/// Dropout-free predictions over `samples` in order.
Evaluation evaluate_model(const TriqModel& model, std::span<const Sample> samples);

struct EvalPoint {
  std::size_t step = 0;
  /// Mean training cross-entropy since the previous evaluation (NaN at step 0).
  double train_loss = 0.0;
  double eval_loss = 0.0;
  std::optional<double> plcc;
  std::optional<double> srocc;
  double rmse = 0.0;
};

struct TrainReport {
  std::vector<EvalPoint> history;
  std::size_t best_step = 0;
  double best_plcc = 0.0;
  std::filesystem::path checkpoint;

  void write_csv(const std::filesystem::path& path) const;
};

struct TrainOptions {
  /// Written whenever the evaluation PLCC improves; empty disables saving.
  std::filesystem::path checkpoint_path;
  std::function<void(const EvalPoint&)> on_eval;
};

/// Pretraining loop: batch size 1 (plus gradient accumulation), cross-entropy
/// against each record's distribution, warm-up/cosine schedule peaking at
/// `config.base_lr`. Evaluates at step 0, every `eval_every` steps and at the
/// end; the weights with the highest PLCC are kept in `model` on return.
TrainReport train(TriqModel& model, std::span<const Sample> train_set, std::span<const Sample> eval_set,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Same loop with `config.finetune_lr` as the peak and a fresh schedule and
/// optimizer state, starting from the weights currently in `model`.
TrainReport finetune(TriqModel& model, std::span<const Sample> train_set, std::span<const Sample> eval_set,
                     const TrainConfig& config, const TrainOptions& options = {});

// ---------------------------------------------------------------------------
// Checkpoints: "TRIQWGHT" + JSON header + float64 parameter blobs.

struct Checkpoint {
  TriqModel model;
  TrainConfig train;
  /// Metrics stored alongside the weights (may be absent).
  std::optional<EvalPoint> metrics;
};

void save_checkpoint(const std::filesystem::path& path, const TriqModel& model, const TrainConfig& train,
                     const std::optional<EvalPoint>& metrics = std::nullopt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace triq
