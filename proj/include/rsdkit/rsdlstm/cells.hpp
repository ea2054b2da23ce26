#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rsdkit/rsdlstm/model.hpp"
#include "rsdkit/rsdlstm/trace.hpp"
#include "rsdkit/synthsurg/dataset.hpp"

namespace rsdkit::rsdlstm {

/// Eval-mode cell states c_t for every frame plus the trace.
struct CellDump {
  std::string surgery_id;
  std::size_t hidden = 0;
  std::vector<double> cells;  // n_frames x hidden
  PredictionTrace trace;

  std::vector<double> cell(std::size_t i) const;
};

CellDump dump_cell_activations(const RsdNet<float>& net, const synthsurg::FrameSequence& seq,
                               std::span<const float> features);

/// Columns t, c_1..c_H, rsd_pred, prog_pred (empty when the model has no
/// progress head).
std::string cells_to_csv(const CellDump& dump);
void write_cells_csv(const std::filesystem::path& path, const CellDump& dump);

/// Per-cell |Spearman(c_i, t)| for one surgery.
std::vector<double> monotonicity(const CellDump& dump);

/// |mean inside - mean outside| / pooled std of each cell, where "inside" is
/// the frames flagged in `in_phase`. NaN when either side has < 2 frames.
std::vector<double> separation(const CellDump& dump, const std::vector<bool>& in_phase);

/// Across-surgery summary of one cell statistic: per-cell median over
/// surgeries, the best cell and its score.
struct CellSummary {
  std::vector<double> per_cell_median;
  std::size_t best_cell = 0;
  double best_score = -1.0;  // -1 when no cell is defined
};
CellSummary summarize_cells(const std::vector<std::vector<double>>& per_surgery);

}  // namespace rsdkit::rsdlstm
