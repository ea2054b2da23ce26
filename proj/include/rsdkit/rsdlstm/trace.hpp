#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rsdkit::rsdlstm {

/// Per-frame predictions for one surgery aligned with ground truth. prog_pred
/// is empty for methods without a progress estimate.
struct PredictionTrace {
  std::string surgery_id;
  std::vector<double> elapsed_min;
  std::vector<double> rsd_true;
  std::vector<double> rsd_pred;
  std::vector<double> prog_pred;

  std::size_t size() const noexcept { return rsd_true.size(); }
  bool has_progress() const noexcept { return !prog_pred.empty(); }
  /// Throws InputError on ragged columns or negative predictions.
  void validate() const;
};

/// Traces of one method keyed by name.
struct MethodTraces {
  std::string method;
  std::vector<PredictionTrace> traces;
};

/// One JSON object per frame: surgery_id, t, elapsed_min, rsd_true, rsd_pred
/// and prog_pred when present.
std::string traces_to_jsonl(const std::vector<PredictionTrace>& traces);
void write_traces(const std::filesystem::path& path, const std::vector<PredictionTrace>& traces);
std::vector<PredictionTrace> read_traces(const std::filesystem::path& path);

}  // namespace rsdkit::rsdlstm
