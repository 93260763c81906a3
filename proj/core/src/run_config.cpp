#include "manner/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace pt = boost::property_tree;
namespace fs = std::filesystem;
namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out;
  in >> out;
  if (!in || !in.eof()) throw ConfigError("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + value + "'");
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

void parse_train(const pt::ptree& section, TrainConfig& t) {
  for (const auto& [key, node] : section) {
    const std::string v = node.data();
    const std::string k = "train." + key;
    if (key == "epochs") t.epochs = parse_number<int>(k, v);
    else if (key == "batch_size") t.batch_size = parse_number<int>(k, v);
    else if (key == "seed") t.seed = parse_number<std::uint64_t>(k, v);
    else if (key == "lr_min") t.lr_min = parse_number<double>(k, v);
    else if (key == "lr_max") t.lr_max = parse_number<double>(k, v);
    else if (key == "warmup_fraction") t.warmup_fraction = parse_number<double>(k, v);
    else if (key == "cycle_per_epoch") t.cycle_per_epoch = parse_flag(k, v);
    else if (key == "segment_seconds") t.segment_seconds = parse_number<double>(k, v);
    else if (key == "segment_hop_seconds") t.segment_hop_seconds = parse_number<double>(k, v);
    else if (key == "tempo_augment") t.tempo_augment = parse_flag(k, v);
    else if (key == "max_steps") t.max_steps = parse_number<std::int64_t>(k, v);
    else if (key == "validate_every") t.validate_every = parse_number<int>(k, v);
    else throw ConfigError("unknown key '" + k + "'");
  }
}

void parse_loss(const pt::ptree& section, LossOptions& loss) {
  for (const auto& [key, node] : section) {
    const std::string v = node.data();
    if (key == "resolutions") loss.resolutions = parse_resolutions(v);
    else if (key == "weighted") loss.weighted = parse_flag("loss.weighted", v);
    else if (key == "log_floor") loss.log_floor = parse_number<Scalar>("loss.log_floor", v);
    else throw ConfigError("unknown key 'loss." + key + "'");
  }
}

void parse_data(const pt::ptree& section, const fs::path& base, DataPaths& d) {
  for (const auto& [key, node] : section) {
    const fs::path p = resolve(base, node.data());
    if (key == "train_noisy") d.train_noisy = p;
    else if (key == "train_clean") d.train_clean = p;
    else if (key == "valid_noisy") d.valid_noisy = p;
    else if (key == "valid_clean") d.valid_clean = p;
    else throw ConfigError("unknown key 'data." + key + "'");
  }
}

}  // namespace

std::vector<StftConfig> parse_resolutions(const std::string& text) {
  std::vector<StftConfig> out;
  std::stringstream items(text);
  std::string item;
  while (std::getline(items, item, ',')) {
    std::stringstream parts(item);
    std::string fft, hop, win, extra;
    if (!std::getline(parts, fft, ':') || !std::getline(parts, hop, ':') || !std::getline(parts, win, ':') ||
        std::getline(parts, extra, ':')) {
      throw ConfigError("bad resolution '" + item + "'; expected fft:hop:win");
    }
    StftConfig cfg{parse_number<int>("loss.resolutions", fft), parse_number<int>("loss.resolutions", hop),
                   parse_number<int>("loss.resolutions", win)};
    cfg.validate();
    out.push_back(cfg);
  }
  if (out.empty()) throw ConfigError("loss.resolutions is empty");
  return out;
}

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  RunConfig rc;
  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty()) {
      throw ConfigError("key '" + name + "' is outside a section");
    }
    if (name == "model") {
      std::map<std::string, std::string> entries;
      for (const auto& [key, node] : section) entries[key] = node.data();
      rc.model = ModelConfig::from_entries(entries);
    } else if (name == "train") {
      parse_train(section, rc.train);
    } else if (name == "loss") {
      parse_loss(section, rc.train.loss);
    } else if (name == "data") {
      parse_data(section, base_dir, rc.data);
    } else if (name == "output") {
      for (const auto& [key, node] : section) {
        if (key == "dir") rc.output_dir = resolve(base_dir, node.data());
        else throw ConfigError("unknown key 'output." + key + "'");
      }
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
  }
  return rc;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

void RunConfig::validate(bool need_training_data) const {
  model.validate();
  train.validate();
  if (data.valid_noisy.empty() != data.valid_clean.empty()) {
    throw ConfigError("data.valid_noisy and data.valid_clean must be given together");
  }
  if (!need_training_data) return;
  const auto require_dir = [](const fs::path& p, const char* key) {
    if (p.empty()) throw ConfigError(std::string("data.") + key + " is required");
    if (!fs::is_directory(p)) throw ConfigError(std::string("data.") + key + ": directory not found: " + p.string());
  };
  require_dir(data.train_noisy, "train_noisy");
  require_dir(data.train_clean, "train_clean");
  if (!data.valid_noisy.empty()) {
    require_dir(data.valid_noisy, "valid_noisy");
    require_dir(data.valid_clean, "valid_clean");
  }
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
