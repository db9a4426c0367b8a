#include "triq/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "triq/error.hpp"

namespace triq {
namespace {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParameterError("config key '" + key + "': bad value '" + text + "'");
  return value;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::array<std::size_t, 5> parse_channels(const std::string& key, const std::string& text) {
  std::array<std::size_t, 5> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == out.size()) throw ParameterError("config key '" + key + "' needs exactly 5 channel counts");
    out[i++] = parse_value<std::size_t>(key, trim(item));
  }
  if (i != out.size()) throw ParameterError("config key '" + key + "' needs exactly 5 channel counts");
  return out;
}

std::string fmt(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

void RunConfig::set(const std::string& dotted_key, const std::string& raw) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) throw ParameterError("config key '" + dotted_key + "' must be section.key");
  const std::string section = dotted_key.substr(0, dot);
  const std::string key = dotted_key.substr(dot + 1);
  const std::string value = trim(raw);
  const auto& k = dotted_key;

  if (section == "model") {
    if (key == "input") {
      model.input = parse_input_kind(value);
    } else if (key == "mode") {
      model.projection.mode = parse_projection_mode(value);
    } else if (key == "patch_size") {
      model.projection.patch_size = parse_value<std::size_t>(k, value);
    } else if (key == "D") {
      model.encoder.model_dim = model.projection.model_dim = parse_value<std::size_t>(k, value);
    } else if (key == "L") {
      model.encoder.layers = parse_value<std::size_t>(k, value);
    } else if (key == "n_heads") {
      model.encoder.heads = parse_value<std::size_t>(k, value);
    } else if (key == "d_ff") {
      model.encoder.ff_dim = model.head.ff_dim = parse_value<std::size_t>(k, value);
    } else if (key == "dropout") {
      model.head.dropout_rate = parse_value<double>(k, value);
    } else if (key == "n_max_tokens") {
      model.projection.n_max_tokens = parse_value<std::size_t>(k, value);
    } else if (key == "feature_channels") {
      model.feature_channels = parse_value<std::size_t>(k, value);
    } else if (key == "backbone_channels") {
      model.backbone.stage_channels = parse_channels(k, value);
    } else if (key == "backbone_blocks") {
      model.backbone.blocks_per_stage = parse_value<std::size_t>(k, value);
    } else {
      throw ParameterError("unknown config key '" + k + "'");
    }
  } else if (section == "train") {
    if (key == "base_lr") {
      train.base_lr = parse_value<double>(k, value);
    } else if (key == "finetune_lr") {
      train.finetune_lr = parse_value<double>(k, value);
    } else if (key == "warmup_fraction") {
      train.warmup_fraction = parse_value<double>(k, value);
    } else if (key == "total_steps") {
      train.total_steps = parse_value<std::size_t>(k, value);
    } else if (key == "beta1") {
      train.beta1 = parse_value<double>(k, value);
    } else if (key == "beta2") {
      train.beta2 = parse_value<double>(k, value);
    } else if (key == "eps_adam") {
      train.eps_adam = parse_value<double>(k, value);
    } else if (key == "eval_every") {
      train.eval_every = parse_value<std::size_t>(k, value);
    } else if (key == "accumulation") {
      train.accumulation = parse_value<std::size_t>(k, value);
    } else {
      throw ParameterError("unknown config key '" + k + "'");
    }
  } else if (section == "data") {
    if (key == "train_manifest") {
      train_manifest = value;
    } else if (key == "eval_manifest") {
      eval_manifest = value;
    } else if (key == "seed") {
      seed = train.seed = parse_value<std::uint64_t>(k, value);
    } else {
      throw ParameterError("unknown config key '" + k + "'");
    }
  } else {
    throw ParameterError("unknown config section '" + section + "'");
  }
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  const auto& ch = model.backbone.stage_channels;
  os << "[model]\n"
     << "input = " << to_string(model.input) << '\n'
     << "mode = " << to_string(model.projection.mode) << '\n'
     << "patch_size = " << model.projection.patch_size << '\n'
     << "D = " << model.encoder.model_dim << '\n'
     << "L = " << model.encoder.layers << '\n'
     << "n_heads = " << model.encoder.heads << '\n'
     << "d_ff = " << model.encoder.ff_dim << '\n'
     << "dropout = " << fmt(model.head.dropout_rate) << '\n'
     << "n_max_tokens = " << model.projection.n_max_tokens << '\n'
     << "feature_channels = " << model.feature_channels << '\n'
     << "backbone_channels = " << ch[0] << ',' << ch[1] << ',' << ch[2] << ',' << ch[3] << ',' << ch[4] << '\n'
     << "backbone_blocks = " << model.backbone.blocks_per_stage << "\n\n"
     << "[train]\n"
     << "base_lr = " << fmt(train.base_lr) << '\n'
     << "finetune_lr = " << fmt(train.finetune_lr) << '\n'
     << "warmup_fraction = " << fmt(train.warmup_fraction) << '\n'
     << "total_steps = " << train.total_steps << '\n'
     << "beta1 = " << fmt(train.beta1) << '\n'
     << "beta2 = " << fmt(train.beta2) << '\n'
     << "eps_adam = " << fmt(train.eps_adam) << '\n'
     << "eval_every = " << train.eval_every << '\n'
     << "accumulation = " << train.accumulation << "\n\n"
     << "[data]\n"
     << "train_manifest = " << train_manifest.string() << '\n'
     << "eval_manifest = " << eval_manifest.string() << '\n'
     << "seed = " << seed << '\n';
  return os.str();
}

RunConfig parse_run_config(const std::string& text, RunConfig config) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) {
      throw ParameterError("config key '" + section + "' must live inside a [section]");
    }
    for (const auto& [key, node] : entries) config.set(section + "." + key, node.data());
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto before_train = base.train_manifest, before_eval = base.eval_manifest;
  RunConfig config = parse_run_config(ss.str(), std::move(base));
  // Manifest paths in a config file are relative to the file.
  const auto dir = path.parent_path();
  if (config.train_manifest != before_train && config.train_manifest.is_relative()) {
    config.train_manifest = dir / config.train_manifest;
  }
  if (config.eval_manifest != before_eval && config.eval_manifest.is_relative()) {
    config.eval_manifest = dir / config.eval_manifest;
  }
  return config;
}

}  // namespace triq
