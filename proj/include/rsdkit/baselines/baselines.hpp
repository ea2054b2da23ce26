#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rsdkit/rsdlstm/trace.hpp"
#include "rsdkit/synthsurg/dataset.hpp"

namespace rsdkit::baselines {

enum class Reference { kMean, kMedian };

/// Reference durations in minutes from the training surgeries. Medians are
/// lower medians. Per-phase statistics use only surgeries containing the phase.
struct ReferenceStats {
  double t_ref_mean = 0.0;
  double t_ref_median = 0.0;
  std::vector<double> phase_mean;
  std::vector<double> phase_median;

  double total(Reference use) const { return use == Reference::kMean ? t_ref_mean : t_ref_median; }
  const std::vector<double>& phases(Reference use) const {
    return use == Reference::kMean ? phase_mean : phase_median;
  }
  nlohmann::json to_json() const;
};

/// Throws StatsError naming a phase that no training surgery contains.
ReferenceStats compute_reference_stats(const synthsurg::Dataset& dataset, const std::vector<std::string>& train_ids);

/// max(0, t_ref - t_el)
double naive_rsd(double t_el, double t_ref);

/// max(0, ref[p] - t_el_in_phase) + sum of ref[m] for m > p. Phase ids are
/// 0-based; later phases count even if the surgery will skip them.
double phase_inferred_rsd(int phase, double t_el_in_phase, const std::vector<double>& phase_ref);

struct ProgressDerivedConfig {
  double prog_floor = 0.01;
  double rsd_cap = 0.0;  // minutes; 3 x t_ref_median by default
};

/// t_el / prog - t_el (clamped at 0), or rsd_cap when prog <= prog_floor.
double progress_derived_rsd(double t_el, double prog, const ProgressDerivedConfig& cfg);

std::vector<rsdlstm::PredictionTrace> naive_traces(const synthsurg::Dataset& dataset,
                                                   const std::vector<std::string>& ids, double t_ref);
std::vector<rsdlstm::PredictionTrace> phase_inferred_traces(const synthsurg::Dataset& dataset,
                                                            const std::vector<std::string>& ids,
                                                            const ReferenceStats& stats, Reference use);
/// Replaces rsd_pred of traces carrying a progress estimate with the
/// progress-derived value; prog_pred is kept.
std::vector<rsdlstm::PredictionTrace> progress_derived_traces(const std::vector<rsdlstm::PredictionTrace>& with_progress,
                                                              const ProgressDerivedConfig& cfg);

}  // namespace rsdkit::baselines
