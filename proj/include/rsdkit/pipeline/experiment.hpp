#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rsdkit/encoder/features.hpp"
#include "rsdkit/evalkit/evaluation.hpp"
#include "rsdkit/pipeline/config.hpp"
#include "rsdkit/rsdlstm/model.hpp"
#include "rsdkit/rsdlstm/trace.hpp"
#include "rsdkit/synthsurg/dataset.hpp"

namespace rsdkit::pipeline {

/// A report row: base[@encoder-task], optionally with a CNN train size, e.g.
/// "rsdnet@rsd-classification" or "rsdnet[T1=40]".
struct MethodSpec {
  std::string name;
  std::string base;          // naive-mean, naive-median, phase-gt-mean, phase-gt-median,
                             // progress-derived, rsdnet, single, timelstm
  std::string encoder_task;  // empty for closed-form baselines; "random" for the untrained encoder
  int t1_size = 0;           // 0: the split's own T1

  bool uses_lstm() const;
  /// The sequence-model variant behind this row (progress-derived uses rsdnet).
  rsdlstm::VariantKind variant() const;
};

MethodSpec parse_method(const std::string& text);
std::vector<MethodSpec> configured_methods(const ExperimentConfig& cfg);

/// Stage-1 validation summary of one trained encoder.
struct EncoderSummary {
  std::string key;
  int fold = 0;
  std::string task;
  std::int64_t best_iteration = 0;
  double v_loss = 0.0;
  double v_metric = 0.0;
  double v_mean_predictor_mae = 0.0;
};

/// Lazily produces and caches every artifact of one configuration under
/// cfg.run_dir(). Existing artifacts are loaded instead of recomputed unless
/// `force` is set.
class Experiment {
 public:
  Experiment(ExperimentConfig cfg, bool force, std::ostream* log = nullptr);

  const ExperimentConfig& config() const { return cfg_; }
  std::filesystem::path dir() const { return cfg_.run_dir(); }

  const synthsurg::Dataset& dataset();
  const std::vector<synthsurg::DatasetSplit>& splits();
  synthsurg::DatasetSplit split_for(int fold, int t1_size);

  /// "progress-regression", "random", ... with an optional "-t1_40" suffix.
  static std::string encoder_key(const std::string& task, int t1_size);
  const encoder::EncoderNet<float>& encoder_net(int fold, const std::string& task, int t1_size);
  const encoder::FeatureSet& features(int fold, const std::string& task, int t1_size);
  const rsdlstm::RsdNet<float>& lstm(int fold, rsdlstm::VariantKind variant, const std::string& task, int t1_size);
  std::vector<rsdlstm::PredictionTrace> traces(int fold, const MethodSpec& method);

  const std::vector<EncoderSummary>& encoder_summaries() const { return encoder_summaries_; }

  /// Runs every configured method on every configured fold and writes
  /// report/report.{json,txt} and report/curves.csv.
  evalkit::EvalReport run();
  nlohmann::json report_json(const evalkit::EvalReport& report) const;

 private:
  void note(const std::string& msg);
  void record_summary(const EncoderSummary& summary);
  bool reuse(const std::filesystem::path& p) const;
  nlohmann::json stamp() const;

  ExperimentConfig cfg_;
  bool force_;
  std::ostream* log_;
  std::unique_ptr<synthsurg::Dataset> dataset_;
  std::optional<std::vector<synthsurg::DatasetSplit>> splits_;
  std::map<std::string, encoder::EncoderNet<float>> encoders_;
  std::map<std::string, encoder::FeatureSet> features_;
  std::map<std::string, rsdlstm::RsdNet<float>> lstms_;
  std::vector<EncoderSummary> encoder_summaries_;
};

/// Full pipeline for one configuration.
evalkit::EvalReport run_experiment(const ExperimentConfig& cfg, bool force, std::ostream* log = nullptr);

/// RSDNet on finetuned features against RSDNet on a frozen, randomly
/// initialized encoder, on the same E sets. Writes report/ablate-no-finetune.*.
evalkit::EvalReport ablate_no_finetune(const ExperimentConfig& cfg, bool force, std::ostream* log = nullptr);

}  // namespace rsdkit::pipeline
