#include "triq/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "container_io.hpp"
#include "triq/config_json.hpp"
#include "triq/error.hpp"
#include "triq/ops.hpp"
#include "triq/random.hpp"

namespace triq {
namespace {

constexpr std::string_view kCheckpointMagic = "TRIQWGHT";
constexpr int kCheckpointVersion = 1;

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const std::vector<Tensor>& params) {
  Snapshot s;
  s.reserve(params.size());
  for (const Tensor& p : params) s.emplace_back(p.data().begin(), p.data().end());
  return s;
}

void restore(std::vector<Tensor>& params, const Snapshot& s) {
  for (std::size_t i = 0; i < params.size(); ++i) std::copy(s[i].begin(), s[i].end(), params[i].data_mut().begin());
}

double plcc_or_worst(const std::optional<double>& v) {
  return v ? *v : -std::numeric_limits<double>::infinity();
}

nlohmann::json metrics_json(const EvalPoint& p) {
  nlohmann::json j = {{"step", p.step}, {"rmse", p.rmse}};
  j["eval_loss"] = std::isnan(p.eval_loss) ? nlohmann::json(nullptr) : nlohmann::json(p.eval_loss);
  j["plcc"] = p.plcc ? nlohmann::json(*p.plcc) : nlohmann::json(nullptr);
  j["srocc"] = p.srocc ? nlohmann::json(*p.srocc) : nlohmann::json(nullptr);
  return j;
}

TrainReport run_loop(TriqModel& model, std::span<const Sample> train_set, std::span<const Sample> eval_set,
                     const TrainConfig& config, double peak_lr, const TrainOptions& options) {
  if (train_set.empty()) throw ParameterError("training set is empty");
  if (eval_set.empty()) throw ParameterError("evaluation set is empty");
  for (const Sample& s : train_set) {
    if (!s.target) throw ContractError("training sample " + s.id + " has neither p1..p5 nor std");
  }

  std::vector<Tensor> params = model.parameters();
  for (Tensor& p : params) p.set_requires_grad(true);
  AdamState state = AdamState::for_params(params);
  const AdamHyper hyper{config.beta1, config.beta2, config.eps_adam};

  Rng order_rng(derive_seed(config.seed, "shuffle"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), order_rng);
  std::size_t cursor = 0;

  TrainReport report;
  report.best_plcc = -std::numeric_limits<double>::infinity();
  report.checkpoint = options.checkpoint_path;
  Snapshot best = snapshot(params);
  bool have_best = false;

  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  const auto evaluate_at = [&](std::size_t step) {
    const Evaluation ev = evaluate_model(model, eval_set);
    EvalPoint point{step,
                    loss_count ? loss_sum / static_cast<double>(loss_count) : std::numeric_limits<double>::quiet_NaN(),
                    ev.mean_loss,
                    ev.metrics.plcc,
                    ev.metrics.srocc,
                    ev.metrics.rmse};
    loss_sum = 0.0;
    loss_count = 0;
    report.history.push_back(point);
    if (!have_best || plcc_or_worst(point.plcc) > report.best_plcc) {
      have_best = true;
      report.best_plcc = plcc_or_worst(point.plcc);
      report.best_step = step;
      best = snapshot(params);
      if (!options.checkpoint_path.empty()) save_checkpoint(options.checkpoint_path, model, config, point);
    }
    if (options.on_eval) options.on_eval(point);
  };

  evaluate_at(0);
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    const double lr = lr_at_step(step, config.total_steps, peak_lr, config.warmup_fraction);
    model.zero_grad();
    for (std::size_t a = 0; a < config.accumulation; ++a) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      const Sample& sample = train_set[order[cursor++]];
      GradTape tape;
      const ForwardResult fwd = model.forward(sample.input, true, &dropout_rng, &tape);
      const Tensor ce = ops::cross_entropy(fwd.probs, sample.target->values(), 1e-12, &tape);
      if (!std::isfinite(ce.item())) {
        throw NumericError("non-finite loss at step " + std::to_string(step) + " on " + sample.id);
      }
      const Tensor loss = ops::scale(ce, 1.0 / static_cast<double>(config.accumulation), &tape);
      tape.backward(loss);
      loss_sum += ce.item();
      ++loss_count;
    }
    adam_step(params, state, lr, hyper);
    if (step % config.eval_every == 0 || step == config.total_steps) evaluate_at(step);
  }
  restore(params, best);
  model.zero_grad();
  return report;
}

Checkpoint read_checkpoint_body(const std::filesystem::path& path, detail::ContainerReader& reader,
                                const nlohmann::json& header) {
  if (header.value("format_version", 0) != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version");
  }
  const ModelConfig model_config = model_config_from_json(header.at("model"));
  const TrainConfig train_config = train_config_from_json(header.at("train"));
  Checkpoint ck{TriqModel::build(model_config, 0), train_config, std::nullopt};

  const auto params = ck.model.named_parameters();
  const auto& declared = header.at("parameters");
  if (declared.size() != params.size()) throw FormatError(path.string() + ": parameter list does not match model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = declared[i].at("name").get<std::string>();
    const auto shape = declared[i].at("shape").get<Shape>();
    if (name != params[i].name || shape != params[i].tensor.shape()) {
      throw FormatError(path.string() + ": parameter " + std::to_string(i) + " is " + name + " " +
                        shape_to_string(shape) + ", model expects " + params[i].name + " " +
                        shape_to_string(params[i].tensor.shape()));
    }
    Tensor t = params[i].tensor;
    const auto values = reader.read_doubles(t.numel());
    std::copy(values.begin(), values.end(), t.data_mut().begin());
  }
  reader.expect_end();

  if (const auto& m = header.at("metrics"); !m.is_null()) {
    EvalPoint p;
    p.step = m.at("step").get<std::size_t>();
    p.eval_loss = m.at("eval_loss").is_null() ? std::numeric_limits<double>::quiet_NaN() : m.at("eval_loss").get<double>();
    p.rmse = m.at("rmse").get<double>();
    if (!m.at("plcc").is_null()) p.plcc = m.at("plcc").get<double>();
    if (!m.at("srocc").is_null()) p.srocc = m.at("srocc").get<double>();
    p.train_loss = std::numeric_limits<double>::quiet_NaN();
    ck.metrics = p;
  }
  return ck;
}

}  // namespace

std::vector<Sample> load_samples(const Manifest& manifest, const ModelConfig& config) {
  std::vector<Sample> samples;
  samples.reserve(manifest.records.size());
  for (const DatasetRecord& r : manifest.records) {
    Sample s;
    s.id = r.image_ref.string();
    s.mos = r.mos;
    if (r.distribution || r.score_std) s.target = r.target_distribution();
    if (config.input == InputKind::Features) {
      s.input = load_feature_map(r.image_ref);
    } else {
      s.input = load_image(r.image_ref);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

Evaluation evaluate_model(const TriqModel& model, std::span<const Sample> samples) {
  Evaluation ev;
  std::vector<double> truth;
  double loss = 0.0;
  std::size_t with_target = 0;
  for (const Sample& s : samples) {
    const QualityDistribution d = model.predict(s.input);
    ev.predicted_mos.push_back(mos_from_distribution(d));
    truth.push_back(s.mos);
    if (s.target) {
      loss += cross_entropy(d, *s.target);
      ++with_target;
    }
  }
  ev.mean_loss = with_target ? loss / static_cast<double>(with_target) : std::numeric_limits<double>::quiet_NaN();
  if (!samples.empty()) ev.metrics = evaluate_metrics(ev.predicted_mos, truth);
  return ev;
}

TrainReport train(TriqModel& model, std::span<const Sample> train_set, std::span<const Sample> eval_set,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  return run_loop(model, train_set, eval_set, config, config.base_lr, options);
}

TrainReport finetune(TriqModel& model, std::span<const Sample> train_set, std::span<const Sample> eval_set,
                     const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  return run_loop(model, train_set, eval_set, config, config.finetune_lr, options);
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const auto opt = [](const std::optional<double>& v) {
    std::ostringstream os;
    os << std::setprecision(10);
    if (v) os << *v; else os << "nan";
    return os.str();
  };
  out << "step,train_loss,eval_loss,plcc,srocc,rmse\n" << std::setprecision(10);
  for (const EvalPoint& p : history) {
    out << p.step << ',';
    if (std::isnan(p.train_loss)) out << "nan"; else out << p.train_loss;
    out << ',' << p.eval_loss << ',' << opt(p.plcc) << ',' << opt(p.srocc) << ',' << p.rmse << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const TriqModel& model, const TrainConfig& train,
                     const std::optional<EvalPoint>& metrics) {
  const auto params = model.named_parameters();
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["model"] = to_json(model.config());
  header["train"] = to_json(train);
  header["preprocessing"] = {{"pixel_range", "[0,1]"},
                             {"normalization", "none"},
                             {"padding", "zero, bottom/right, to a multiple of the backbone stride or patch size"},
                             {"resizing", "none"}};
  header["pe_rows"] = model.tokenizer().positional_embedding().table.dim(0);
  header["metrics"] = metrics ? metrics_json(*metrics) : nlohmann::json(nullptr);
  auto& list = header["parameters"] = nlohmann::json::array();
  for (const auto& p : params) list.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});

  detail::ContainerWriter writer(path, kCheckpointMagic, header.dump());
  for (const auto& p : params) writer.write_doubles(p.tensor.data());
  writer.close();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  detail::ContainerReader reader(path, kCheckpointMagic);
  try {
    return read_checkpoint_body(path, reader, nlohmann::json::parse(reader.header()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
}

}  // namespace triq
