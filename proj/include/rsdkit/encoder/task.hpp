#pragma once

#include <string>

#include <json.hpp>

namespace rsdkit::encoder {

enum class TaskKind {
  kRsdClassification,
  kProgressClassification,
  kRsdRegression,
  kProgressRegression,
  kPhaseClassification,  // needs simulator phase labels; feeds the TimeLSTM-style variant
};

/// Duration-related objective of the frame encoder.
struct EncoderTask {
  TaskKind kind = TaskKind::kProgressRegression;
  double bin_width_min = 3.0;  // rsd_classification
  int max_bins = 20;           // rsd_classification
  int n_classes = 10;          // progress_classification, phase_classification
  double s_norm = 5.0;         // rsd_regression

  static EncoderTask progress_regression();
  static EncoderTask rsd_regression(double s_norm);
  static EncoderTask rsd_classification(double bin_width_min = 3.0, int max_bins = 20);
  static EncoderTask progress_classification(int n_classes = 10);
  static EncoderTask phase_classification(int n_phases);

  bool is_classification() const;
  /// Width of the head: 1 for regressions, the class count otherwise.
  int output_dim() const;
  void validate() const;

  /// Kebab-case CLI name, e.g. "progress-regression".
  std::string name() const;
  /// Inverse of name(); phase classification needs the phase count.
  static EncoderTask parse(const std::string& name, double s_norm, int n_phases);

  nlohmann::json to_json() const;
  static EncoderTask from_json(const nlohmann::json& j);
};

/// Training target for one frame: `cls` for classification kinds, `value` for
/// regressions (progress, or rsd_min / s_norm).
struct TaskTarget {
  int cls = -1;
  double value = 0.0;
};

/// rsd bins: min(floor(rsd / width), max_bins - 1); progress classes:
/// min(floor(progress * K), K - 1); phase classes: the phase id.
TaskTarget label_for_task(const EncoderTask& task, double progress, double rsd_min, int phase_id);

}  // namespace rsdkit::encoder
