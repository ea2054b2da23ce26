#pragma once

// Experiment configuration. The file format is flat `key = value` lines with
// `#` comments; the first key must be `config_version`. Keys not listed in
// ExperimentConfig::keys() are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsdkit/encoder/training.hpp"
#include "rsdkit/rsdlstm/training.hpp"
#include "rsdkit/synthsurg/splits.hpp"
#include "rsdkit/synthsurg/workflow.hpp"

namespace rsdkit::pipeline {

inline constexpr int kConfigVersion = 1;

struct ExperimentConfig {
  std::string preset = "cholec";
  int n_surgeries = 120;
  double time_scale = 0.2;
  std::uint64_t data_seed = 42;
  std::uint64_t split_seed = 7;
  synthsurg::SplitRatios ratios;
  int n_folds = 1;
  std::vector<int> folds;  // folds to run; empty means all
  double s_norm = 0.0;     // 0: preset default
  encoder::EncoderTrainConfig encoder;
  rsdlstm::LstmTrainConfig lstm;
  std::vector<std::string> methods = {"naive-mean", "naive-median", "rsdnet"};
  std::vector<int> cnn_train_sizes;
  double prog_floor = 0.01;
  double rsd_cap_factor = 3.0;  // rsd_cap = factor x t_ref_median
  // Not part of the hash.
  std::filesystem::path output_dir = "out";
  int threads = 0;

  static std::vector<std::string> keys();
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  /// Preset spec with time_scale applied.
  synthsurg::WorkflowSpec workflow() const;
  double effective_s_norm() const;
  std::vector<int> folds_to_run() const;
  void validate() const;

  /// `key = value` lines for every hashed key, in keys() order.
  std::string canonical() const;
  std::string hash() const;
  std::filesystem::path run_dir() const { return output_dir / hash(); }
  nlohmann::json to_json() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies `key=value` overrides on top of cfg.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& assignments);

}  // namespace rsdkit::pipeline
