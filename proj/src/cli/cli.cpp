#include "triq/cli.hpp"

#include <boost/program_options.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "triq/attnviz.hpp"
#include "triq/config_json.hpp"
#include "triq/dataio.hpp"
#include "triq/error.hpp"
#include "triq/random.hpp"
#include "triq/run_config.hpp"
#include "triq/trainer.hpp"

namespace po = boost::program_options;
namespace fs = std::filesystem;

namespace triq {
namespace {

constexpr const char* kCommands =
    "usage: triq <command> [flags]\n"
    "\n"
    "commands:\n"
    "  split      stratified train/test split of a manifest\n"
    "  train      train a model from a config and two manifests\n"
    "  finetune   continue training a checkpoint at the finetune learning rate\n"
    "  predict    print the quality distribution and MOS of one image\n"
    "  evaluate   PLCC / SROCC / RMSE of a checkpoint over a manifest\n"
    "  visualize  quality-token attention mask and overlay for one image\n"
    "\n"
    "Run `triq <command> --help` for the flags of a command.\n";

struct UsageError : Error {
  using Error::Error;
};

struct Parsed {
  po::variables_map vm;
  bool help = false;
};

Parsed parse(const std::vector<std::string>& args, const po::options_description& desc) {
  Parsed p;
  po::store(po::command_line_parser(args).options(desc).run(), p.vm);
  p.help = p.vm.count("help") > 0;
  if (!p.help) po::notify(p.vm);
  return p;
}

bool show_help(const Parsed& p, const std::string& command, const po::options_description& desc, std::ostream& out) {
  if (!p.help) return false;
  out << "usage: triq " << command << " [flags]\n\n" << desc;
  return true;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : "nan"; }

ModelInput load_input(const ModelConfig& config, const fs::path& path) {
  if (config.input == InputKind::Features) return load_feature_map(path);
  return load_image(path);
}

// ---------------------------------------------------------------------------

int cmd_split(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  po::options_description desc("split flags");
  desc.add_options()("help,h", "show this help")
      ("manifest", po::value<std::string>()->required(), "input manifest CSV")
      ("train-frac", po::value<double>()->default_value(0.85, "0.85"), "fraction of each stratum assigned to training")
      ("seed", po::value<std::uint64_t>()->default_value(0), "run seed (the split uses its 'split' sub-seed)")
      ("out", po::value<std::string>()->required(), "output prefix: writes <out>.train.csv and <out>.test.csv");
  const Parsed p = parse(args, desc);
  if (show_help(p, "split", desc, out)) return kExitOk;

  Manifest manifest = load_manifest(p.vm["manifest"].as<std::string>());
  for (DatasetRecord& r : manifest.records) {
    if (!r.si) r.si = spatial_information(load_image(r.image_ref));
  }
  const auto seed = derive_seed(p.vm["seed"].as<std::uint64_t>(), "split");
  const SplitSummary summary = stratified_split(manifest, p.vm["train-frac"].as<double>(), seed);
  for (const auto& w : summary.warnings) err << "warning: " << w << '\n';

  Manifest train_part, test_part;
  for (const DatasetRecord& r : manifest.records) {
    (r.split == SplitTag::Train ? train_part : test_part).records.push_back(r);
  }
  const std::string prefix = p.vm["out"].as<std::string>();
  save_manifest(prefix + ".train.csv", train_part);
  save_manifest(prefix + ".test.csv", test_part);
  out << "train " << train_part.records.size() << " test " << test_part.records.size() << " si_threshold "
      << num(summary.si_threshold) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

void add_run_flags(po::options_description& desc) {
  desc.add_options()
      ("train-manifest", po::value<std::string>(), "training manifest (overrides data.train_manifest)")
      ("eval-manifest", po::value<std::string>(), "evaluation manifest (overrides data.eval_manifest)")
      ("seed", po::value<std::uint64_t>(), "run seed (overrides data.seed)")
      ("steps", po::value<std::size_t>(), "optimizer steps (overrides train.total_steps)")
      ("set", po::value<std::vector<std::string>>()->composing(), "section.key=value override, repeatable")
      ("out-dir", po::value<std::string>()->required(), "directory for the checkpoint, report and effective config");
}

// Flags win over the config file.
void apply_run_flags(const po::variables_map& vm, RunConfig& rc) {
  if (vm.count("set")) {
    for (const auto& kv : vm["set"].as<std::vector<std::string>>()) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects section.key=value, got '" + kv + "'");
      rc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
  if (vm.count("train-manifest")) rc.train_manifest = vm["train-manifest"].as<std::string>();
  if (vm.count("eval-manifest")) rc.eval_manifest = vm["eval-manifest"].as<std::string>();
  if (vm.count("seed")) rc.seed = rc.train.seed = vm["seed"].as<std::uint64_t>();
  if (vm.count("steps")) rc.train.total_steps = vm["steps"].as<std::size_t>();
  if (rc.train_manifest.empty()) throw UsageError("no training manifest (use --train-manifest or data.train_manifest)");
  if (rc.eval_manifest.empty()) throw UsageError("no evaluation manifest (use --eval-manifest or data.eval_manifest)");
  rc.validate();
}

void print_point(std::ostream& out, const EvalPoint& p) {
  out << "step " << p.step << " train_loss " << num(p.train_loss) << " eval_loss " << num(p.eval_loss) << " plcc "
      << num(p.plcc) << " srocc " << num(p.srocc) << " rmse " << num(p.rmse) << std::endl;
}

int run_training(const RunConfig& rc, TriqModel& model, bool finetuning, const fs::path& out_dir, std::ostream& out) {
  const auto train_samples = load_samples(load_manifest(rc.train_manifest), rc.model);
  const auto eval_samples = load_samples(load_manifest(rc.eval_manifest), rc.model);
  fs::create_directories(out_dir);
  {
    std::ofstream ini(out_dir / "config.ini");
    ini << rc.to_ini();
  }
  TrainOptions options;
  options.checkpoint_path = out_dir / (finetuning ? "finetuned.triq" : "best.triq");
  options.on_eval = [&out](const EvalPoint& p) { print_point(out, p); };
  const TrainReport report = finetuning ? finetune(model, train_samples, eval_samples, rc.train, options)
                                        : train(model, train_samples, eval_samples, rc.train, options);
  report.write_csv(out_dir / (finetuning ? "finetune_report.csv" : "train_report.csv"));
  out << "best step " << report.best_step << " plcc " << num(report.best_plcc) << " -> "
      << options.checkpoint_path.string() << '\n';
  return kExitOk;
}

int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream&) {
  po::options_description desc("train flags");
  desc.add_options()("help,h", "show this help")
      ("config", po::value<std::string>(), "INI config with [model], [train] and [data] sections (defaults if omitted)");
  add_run_flags(desc);
  const Parsed p = parse(args, desc);
  if (show_help(p, "train", desc, out)) return kExitOk;

  RunConfig rc = p.vm.count("config") ? load_run_config(p.vm["config"].as<std::string>()) : RunConfig{};
  apply_run_flags(p.vm, rc);
  TriqModel model = TriqModel::build(rc.model, rc.seed);
  return run_training(rc, model, false, p.vm["out-dir"].as<std::string>(), out);
}

int cmd_finetune(const std::vector<std::string>& args, std::ostream& out, std::ostream&) {
  po::options_description desc("finetune flags");
  desc.add_options()("help,h", "show this help")
      ("from-checkpoint", po::value<std::string>()->required(), "checkpoint holding the pretrained weights")
      ("config", po::value<std::string>(), "INI config applied on top of the checkpoint's settings; model keys must match");
  add_run_flags(desc);
  const Parsed p = parse(args, desc);
  if (show_help(p, "finetune", desc, out)) return kExitOk;

  Checkpoint ck = load_checkpoint(p.vm["from-checkpoint"].as<std::string>());
  RunConfig rc;
  rc.model = ck.model.config();
  rc.train = ck.train;
  rc.seed = ck.train.seed;
  if (p.vm.count("config")) rc = load_run_config(p.vm["config"].as<std::string>(), rc);
  apply_run_flags(p.vm, rc);
  if (to_json(rc.model) != to_json(ck.model.config())) {
    throw UsageError("finetune cannot change [model] settings of the checkpoint");
  }
  return run_training(rc, ck.model, true, p.vm["out-dir"].as<std::string>(), out);
}

// ---------------------------------------------------------------------------

int cmd_predict(const std::vector<std::string>& args, std::ostream& out, std::ostream&) {
  po::options_description desc("predict flags");
  desc.add_options()("help,h", "show this help")
      ("weights", po::value<std::string>()->required(), "checkpoint file")
      ("image", po::value<std::string>()->required(), "image file, or a .fmap feature container for feature-input models");
  const Parsed p = parse(args, desc);
  if (show_help(p, "predict", desc, out)) return kExitOk;

  const Checkpoint ck = load_checkpoint(p.vm["weights"].as<std::string>());
  const QualityDistribution d = ck.model.predict(load_input(ck.model.config(), p.vm["image"].as<std::string>()));
  out << std::fixed << std::setprecision(6);
  for (double v : d.p) out << v << ' ';
  out << mos_from_distribution(d) << '\n';
  out.unsetf(std::ios::floatfield);
  return kExitOk;
}

int cmd_evaluate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  po::options_description desc("evaluate flags");
  desc.add_options()("help,h", "show this help")
      ("weights", po::value<std::string>()->required(), "checkpoint file")
      ("manifest", po::value<std::string>()->required(), "manifest with ground-truth MOS")
      ("out", po::value<std::string>()->required(), "metrics CSV (n,plcc,srocc,rmse)")
      ("predictions", po::value<std::string>(), "per-image CSV (default: <out stem>.predictions.csv next to --out)");
  const Parsed p = parse(args, desc);
  if (show_help(p, "evaluate", desc, out)) return kExitOk;

  const Checkpoint ck = load_checkpoint(p.vm["weights"].as<std::string>());
  const Manifest manifest = load_manifest(p.vm["manifest"].as<std::string>());
  const auto samples = load_samples(manifest, ck.model.config());
  const Evaluation ev = evaluate_model(ck.model, samples);

  const fs::path out_path = p.vm["out"].as<std::string>();
  const fs::path pred_path = p.vm.count("predictions")
                                 ? fs::path(p.vm["predictions"].as<std::string>())
                                 : out_path.parent_path() / (out_path.stem().string() + ".predictions.csv");
  {
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot write " + out_path.string());
    f << "n,plcc,srocc,rmse\n"
      << ev.metrics.n << ',' << num(ev.metrics.plcc) << ',' << num(ev.metrics.srocc) << ',' << num(ev.metrics.rmse)
      << '\n';
  }
  {
    std::ofstream f(pred_path);
    if (!f) throw IoError("cannot write " + pred_path.string());
    f << "path,mos_true,mos_pred\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
      f << samples[i].id << ',' << num(samples[i].mos) << ',' << num(ev.predicted_mos[i]) << '\n';
    }
  }
  out << "n " << ev.metrics.n << " plcc " << num(ev.metrics.plcc) << " srocc " << num(ev.metrics.srocc) << " rmse "
      << num(ev.metrics.rmse) << '\n';
  if (!ev.metrics.plcc || !ev.metrics.srocc) {
    err << "error: correlations are undefined for " << ev.metrics.n
        << " record(s) or constant scores; RMSE was still computed\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_visualize(const std::vector<std::string>& args, std::ostream& out, std::ostream&) {
  po::options_description desc("visualize flags");
  desc.add_options()("help,h", "show this help")
      ("weights", po::value<std::string>()->required(), "checkpoint file")
      ("image", po::value<std::string>()->required(), "image to analyse and overlay")
      ("features", po::value<std::string>(), ".fmap feature container (required for feature-input models)")
      ("layer", po::value<std::string>()->default_value("last"), "encoder layer 1..L, 'last', or 'mean' over all layers")
      ("alpha", po::value<double>()->default_value(0.2, "0.2"), "overlay brightness where the mask is 0")
      ("out", po::value<std::string>()->required(), "output prefix: writes <out>.mask.png and <out>.overlay.png");
  const Parsed p = parse(args, desc);
  if (show_help(p, "visualize", desc, out)) return kExitOk;

  const Checkpoint ck = load_checkpoint(p.vm["weights"].as<std::string>());
  const std::size_t layers = ck.model.config().encoder.layers;
  LayerSelect select = LayerSelect::mean();
  if (const auto text = p.vm["layer"].as<std::string>(); text == "last") {
    if (layers == 0) throw UsageError("the model has no encoder layers to visualise");
    select = LayerSelect::layer(layers - 1);
  } else if (text != "mean") {
    std::size_t pos = 0;
    unsigned long value = 0;
    try {
      value = std::stoul(text, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != text.size() || text.empty()) throw UsageError("--layer must be 'mean' or a layer number, got '" + text + "'");
    if (value < 1 || value > layers) {
      throw UsageError("--layer " + text + " out of range: the model has " + std::to_string(layers) + " layer(s)");
    }
    select = LayerSelect::layer(value - 1);
  }

  const Tensor image = load_image(p.vm["image"].as<std::string>());
  ModelInput input = image;
  if (ck.model.config().input == InputKind::Features) {
    if (!p.vm.count("features")) throw UsageError("this model reads feature maps: pass --features");
    input = load_feature_map(p.vm["features"].as<std::string>());
  }
  const ForwardResult fwd = ck.model.forward(input);
  const AttentionMask mask =
      attention_mask(fwd.attention, select, fwd.grid_h, fwd.grid_w, image.dim(0), image.dim(1));
  const std::string prefix = p.vm["out"].as<std::string>();
  save_png(prefix + ".mask.png", mask.values);
  save_png(prefix + ".overlay.png", overlay(image, mask, p.vm["alpha"].as<double>()));
  out << "layer " << mask.layer_used << " grid " << fwd.grid_h << 'x' << fwd.grid_w << " -> " << prefix
      << ".mask.png, " << prefix << ".overlay.png\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    err << kCommands;
    return kExitUsage;
  }
  const std::string& command = args.front();
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  try {
    if (command == "--help" || command == "-h" || command == "help") {
      out << kCommands;
      return kExitOk;
    }
    if (command == "split") return cmd_split(rest, out, err);
    if (command == "train") return cmd_train(rest, out, err);
    if (command == "finetune") return cmd_finetune(rest, out, err);
    if (command == "predict") return cmd_predict(rest, out, err);
    if (command == "evaluate") return cmd_evaluate(rest, out, err);
    if (command == "visualize") return cmd_visualize(rest, out, err);
    err << "unknown command '" << command << "'\n\n" << kCommands;
    return kExitUsage;
  } catch (const po::error& e) {
    err << "error: " << e.what() << "\n(see `triq " << command << " --help`)\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace triq
