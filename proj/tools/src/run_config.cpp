#include "run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <utility>
#include <vector>

#include "fsl/errors.hpp"

namespace fsl::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError("config: key '" + key + "': cannot parse '" + value + "' as number");
  }
}

long long to_int(const std::string& key, const std::string& value) {
  long long v = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    throw ArgumentError("config: key '" + key + "': cannot parse '" + value + "' as integer");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    throw ArgumentError("config: key '" + key + "': cannot parse '" + value +
                        "' as unsigned integer");
  return v;
}

}  // namespace

std::string to_string(CliModel model) {
  switch (model) {
    case CliModel::kKan: return "kan";
    case CliModel::kMlp: return "mlp";
    case CliModel::kMlpPil: return "mlp_pil";
  }
  return "kan";
}

CliModel cli_model_from_string(const std::string& name) {
  if (name == "kan") return CliModel::kKan;
  if (name == "mlp") return CliModel::kMlp;
  if (name == "mlp_pil") return CliModel::kMlpPil;
  throw ArgumentError("config: model must be kan, mlp or mlp_pil (got '" + name + "')");
}

network::ModelKind RunConfig::model_kind() const {
  return model == CliModel::kKan ? network::ModelKind::kKan : network::ModelKind::kMlp;
}

network::Architecture RunConfig::architecture() const {
  std::vector<int> widths;
  widths.push_back(data::kFeatureCount);
  for (int l = 1; l < layers; ++l) widths.push_back(width);
  widths.push_back(1);
  if (model == CliModel::kKan)
    return network::Architecture::kan(widths, grid_size, spline_order);
  return network::Architecture::mlp(widths);
}

RunConfig default_run_config(CliModel model) {
  RunConfig cfg;
  cfg.model = model;
  switch (model) {
    case CliModel::kKan:
      cfg.layers = 7;
      cfg.width = 71;
      cfg.train = network::TrainConfig::kan_defaults();
      break;
    case CliModel::kMlp:
      cfg.layers = 4;
      cfg.width = 71;
      cfg.train = network::TrainConfig::mlp_defaults();
      break;
    case CliModel::kMlpPil:
      cfg.layers = 4;
      cfg.width = 71;
      cfg.train = network::TrainConfig::mlp_pil_defaults();
      break;
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");

  std::vector<std::pair<std::string, std::string>> entries;  // "section.key" -> value
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        throw ArgumentError("config: line " + std::to_string(line_no) + ": malformed section");
      section = trim(text.substr(1, text.size() - 2));
      if (section != "architecture" && section != "train")
        throw ArgumentError("config: unknown section [" + section + "]");
      continue;
    }
    std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw ArgumentError("config: line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ArgumentError("config: line " + std::to_string(line_no) + ": empty key or value");
    entries.emplace_back(section.empty() ? key : section + "." + key, value);
  }

  // The model kind decides the defaults, so find it first.
  CliModel model = CliModel::kKan;
  bool model_seen = false;
  for (const auto& [key, value] : entries) {
    if (key == "model") {
      model = cli_model_from_string(value);
      model_seen = true;
    }
  }
  if (!model_seen) throw ArgumentError("config: missing required key 'model'");

  RunConfig cfg = default_run_config(model);
  for (const auto& [key, value] : entries) {
    if (key == "model") continue;
    if (key == "architecture.layers") cfg.layers = static_cast<int>(to_int(key, value));
    else if (key == "architecture.width") cfg.width = static_cast<int>(to_int(key, value));
    else if (key == "architecture.grid_size") cfg.grid_size = static_cast<int>(to_int(key, value));
    else if (key == "architecture.spline_order")
      cfg.spline_order = static_cast<int>(to_int(key, value));
    else if (key == "train.learning_rate") cfg.train.learning_rate = to_double(key, value);
    else if (key == "train.batch_size") cfg.train.batch_size = static_cast<int>(to_int(key, value));
    else if (key == "train.epochs") cfg.train.max_epochs = static_cast<int>(to_int(key, value));
    else if (key == "train.dropout") cfg.train.dropout_rate = to_double(key, value);
    else if (key == "train.gamma1") cfg.train.gamma1 = to_double(key, value);
    else if (key == "train.gamma2") cfg.train.gamma2 = to_double(key, value);
    else if (key == "train.fd_step") cfg.train.fd_step = to_double(key, value);
    else if (key == "train.collocation_points")
      cfg.train.collocation_points = static_cast<int>(to_int(key, value));
    else if (key == "train.seed") cfg.train.seed = to_u64(key, value);
    else if (key == "train.early_stop_patience")
      cfg.train.early_stop_patience = static_cast<int>(to_int(key, value));
    else if (key == "train.early_stop_min_delta")
      cfg.train.early_stop_min_delta = to_double(key, value);
    else
      throw ArgumentError("config: unknown key '" + key + "'");
  }

  if (cfg.layers < 1) throw ArgumentError("config: architecture.layers must be >= 1");
  if (cfg.width < 1) throw ArgumentError("config: architecture.width must be >= 1");
  network::validate(cfg.train);
  cfg.architecture();  // validates widths/grid
  return cfg;
}

std::optional<std::uint64_t> env_seed_override() {
  const char* raw = std::getenv("FSL_SEED");
  if (raw == nullptr) return std::nullopt;
  std::string text(raw);
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ArgumentError("FSL_SEED: cannot parse '" + text + "' as unsigned integer");
  return v;
}

}  // namespace fsl::cli
