#include "rsdkit/pipeline/config.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"
#include "rsdkit/common/hash.hpp"

namespace rsdkit::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (auto t = trim(tok); !t.empty()) out.push_back(t);
  return out;
}

template <typename T>
T parse_num(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_same_v<T, double>) out = std::stod(v, &used);
    else if constexpr (std::is_same_v<T, std::uint64_t>) out = std::stoull(v, &used);
    else if constexpr (std::is_same_v<T, std::int64_t>) out = std::stoll(v, &used);
    else out = static_cast<T>(std::stoi(v, &used));
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, v));
  }
}

std::string num(double v) { return fmt::format("{}", v); }

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt::format("{}", xs[i]);
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
  bool hashed = true;
};

#define NUM_FIELD(key, member, T)                                                                  \
  {                                                                                                \
    key, Field {                                                                                   \
      [](ExperimentConfig& c, const std::string& v) { c.member = parse_num<T>(key, v); },          \
          [](const ExperimentConfig& c) { return fmt::format("{}", c.member); }                    \
    }                                                                                              \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"preset", {[](ExperimentConfig& c, const std::string& v) { c.preset = v; },
                  [](const ExperimentConfig& c) { return c.preset; }}},
      NUM_FIELD("n_surgeries", n_surgeries, int),
      NUM_FIELD("time_scale", time_scale, double),
      NUM_FIELD("data_seed", data_seed, std::uint64_t),
      NUM_FIELD("split_seed", split_seed, std::uint64_t),
      {"split_ratios", {[](ExperimentConfig& c, const std::string& v) { c.ratios = synthsurg::SplitRatios::parse(v); },
                        [](const ExperimentConfig& c) { return c.ratios.to_string(); }}},
      NUM_FIELD("n_folds", n_folds, int),
      {"folds", {[](ExperimentConfig& c, const std::string& v) {
                   c.folds.clear();
                   if (v != "all")
                     for (const auto& f : split_list(v)) c.folds.push_back(synthsurg::parse_fold(f));
                 },
                 [](const ExperimentConfig& c) { return c.folds.empty() ? std::string("all") : join(c.folds); }}},
      NUM_FIELD("s_norm", s_norm, double),
      {"encoder.hidden", {[](ExperimentConfig& c, const std::string& v) {
                            c.encoder.hidden_dims.clear();
                            for (const auto& h : split_list(v))
                              c.encoder.hidden_dims.push_back(parse_num<std::size_t>("encoder.hidden", h));
                          },
                          [](const ExperimentConfig& c) { return join(c.encoder.hidden_dims); }}},
      NUM_FIELD("encoder.iterations", encoder.iterations, std::int64_t),
      NUM_FIELD("encoder.batch_size", encoder.batch_size, int),
      NUM_FIELD("encoder.lr0", encoder.sgd.lr0, double),
      NUM_FIELD("encoder.momentum", encoder.sgd.momentum, double),
      NUM_FIELD("encoder.weight_decay", encoder.sgd.weight_decay, double),
      NUM_FIELD("encoder.decay_factor", encoder.sgd.decay_factor, double),
      NUM_FIELD("encoder.decay_every", encoder.sgd.decay_every, std::int64_t),
      NUM_FIELD("encoder.clip_norm", encoder.clip_norm, double),
      NUM_FIELD("encoder.eval_every", encoder.eval_every, std::int64_t),
      NUM_FIELD("encoder.seed", encoder.seed, std::uint64_t),
      NUM_FIELD("lstm.hidden", lstm.hidden, std::size_t),
      NUM_FIELD("lstm.dropout", lstm.dropout_p, double),
      NUM_FIELD("lstm.iterations", lstm.iterations, std::int64_t),
      NUM_FIELD("lstm.lr0", lstm.sgd.lr0, double),
      NUM_FIELD("lstm.momentum", lstm.sgd.momentum, double),
      NUM_FIELD("lstm.weight_decay", lstm.sgd.weight_decay, double),
      NUM_FIELD("lstm.decay_factor", lstm.sgd.decay_factor, double),
      NUM_FIELD("lstm.decay_every", lstm.sgd.decay_every, std::int64_t),
      NUM_FIELD("lstm.clip_norm", lstm.clip_norm, double),
      NUM_FIELD("lstm.eval_every", lstm.eval_every, std::int64_t),
      NUM_FIELD("lstm.seed", lstm.seed, std::uint64_t),
      {"methods", {[](ExperimentConfig& c, const std::string& v) { c.methods = split_list(v); },
                   [](const ExperimentConfig& c) { return join(c.methods); }}},
      {"cnn_train_sizes", {[](ExperimentConfig& c, const std::string& v) {
                             c.cnn_train_sizes.clear();
                             for (const auto& s : split_list(v)) c.cnn_train_sizes.push_back(parse_num<int>("cnn_train_sizes", s));
                           },
                           [](const ExperimentConfig& c) { return join(c.cnn_train_sizes); }}},
      NUM_FIELD("prog_floor", prog_floor, double),
      NUM_FIELD("rsd_cap_factor", rsd_cap_factor, double),
      {"output_dir", {[](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
                      [](const ExperimentConfig& c) { return c.output_dir.string(); }, false}},
      {"threads", {[](ExperimentConfig& c, const std::string& v) { c.threads = parse_num<int>("threads", v); },
                   [](const ExperimentConfig& c) { return std::to_string(c.threads); }, false}},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, trim(value)); }

std::string ExperimentConfig::get(const std::string& key) const { return field(key).get(*this); }

synthsurg::WorkflowSpec ExperimentConfig::workflow() const {
  auto spec = synthsurg::preset(preset);
  spec.time_scale = time_scale;
  spec.validate();
  return spec;
}

double ExperimentConfig::effective_s_norm() const {
  return s_norm > 0.0 ? s_norm : synthsurg::default_s_norm(preset);
}

std::vector<int> ExperimentConfig::folds_to_run() const {
  if (!folds.empty()) return folds;
  std::vector<int> out(static_cast<std::size_t>(n_folds));
  for (int k = 0; k < n_folds; ++k) out[static_cast<std::size_t>(k)] = k;
  return out;
}

void ExperimentConfig::validate() const {
  workflow();
  if (n_surgeries < 1) throw ConfigError("n_surgeries >= 1 violated");
  ratios.validate();
  if (n_folds < 1) throw ConfigError("n_folds >= 1 violated");
  for (int f : folds)
    if (f < 0 || f >= n_folds) throw ConfigError(fmt::format("fold {} outside [0, {})", f, n_folds));
  if (s_norm < 0.0) throw ConfigError("s_norm must be > 0 (or 0 for the preset default)");
  encoder.validate();
  auto l = lstm;
  l.s_norm = effective_s_norm();
  l.validate();
  if (methods.empty() && cnn_train_sizes.empty()) throw ConfigError("no methods configured");
  if (!(prog_floor >= 0.0 && prog_floor < 1.0)) throw ConfigError("0 <= prog_floor < 1 violated");
  if (!(rsd_cap_factor > 0.0)) throw ConfigError("rsd_cap_factor > 0 violated");
}

std::string ExperimentConfig::canonical() const {
  std::string out = fmt::format("config_version = {}\n", kConfigVersion);
  for (const auto& [k, f] : fields())
    if (f.hashed) out += k + " = " + f.get(*this) + "\n";
  return out;
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(canonical())); }

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  j["config_version"] = kConfigVersion;
  for (const auto& [k, f] : fields())
    if (f.hashed) j[k] = f.get(*this);
  j["config_hash"] = hash();
  return j;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool saw_version = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", lineno));
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (!saw_version) {
      if (key != "config_version") throw ConfigError("config must start with config_version");
      if (parse_num<int>(key, value) != kConfigVersion)
        throw ConfigError(fmt::format("unsupported config_version {} (expected {})", value, kConfigVersion));
      saw_version = true;
      continue;
    }
    cfg.set(key, value);
  }
  if (!saw_version) throw ConfigError("config must start with config_version");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("no config file at " + path.string());
  return parse_config(read_file(path));
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + a + "' is not key=value");
    cfg.set(trim(a.substr(0, eq)), a.substr(eq + 1));
  }
}

}  // namespace rsdkit::pipeline
