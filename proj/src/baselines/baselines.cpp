#include "rsdkit/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "rsdkit/common/error.hpp"
#include "rsdkit/common/stats.hpp"

namespace rsdkit::baselines {

using rsdlstm::PredictionTrace;

nlohmann::json ReferenceStats::to_json() const {
  return {{"t_ref_mean", t_ref_mean},
          {"t_ref_median", t_ref_median},
          {"phase_mean", phase_mean},
          {"phase_median", phase_median}};
}

ReferenceStats compute_reference_stats(const synthsurg::Dataset& dataset, const std::vector<std::string>& train_ids) {
  if (train_ids.empty()) throw StatsError("reference statistics need at least one training surgery");
  const auto n_phases = static_cast<std::size_t>(dataset.spec.n_phases);
  std::vector<double> totals;
  std::vector<std::vector<double>> per_phase(n_phases);
  for (const auto& id : train_ids) {
    const auto& r = dataset.at(id).record;
    totals.push_back(r.total_duration_T);
    for (std::size_t k = 0; k < r.segments.size(); ++k)
      per_phase.at(static_cast<std::size_t>(r.segments[k].phase_id)).push_back(r.segment_minutes(k));
  }
  ReferenceStats s;
  s.t_ref_mean = stats::mean(totals);
  s.t_ref_median = stats::lower_median(totals);
  for (std::size_t p = 0; p < n_phases; ++p) {
    if (per_phase[p].empty())
      throw StatsError("phase " + std::to_string(p) + " does not occur in any training surgery");
    s.phase_mean.push_back(stats::mean(per_phase[p]));
    s.phase_median.push_back(stats::lower_median(per_phase[p]));
  }
  return s;
}

double naive_rsd(double t_el, double t_ref) { return std::max(0.0, t_ref - t_el); }

double phase_inferred_rsd(int phase, double t_el_in_phase, const std::vector<double>& phase_ref) {
  if (phase < 0 || phase >= static_cast<int>(phase_ref.size()))
    throw InputError("phase id " + std::to_string(phase) + " outside [0, " + std::to_string(phase_ref.size()) + ")");
  double rsd = std::max(0.0, phase_ref[static_cast<std::size_t>(phase)] - t_el_in_phase);
  for (std::size_t m = static_cast<std::size_t>(phase) + 1; m < phase_ref.size(); ++m) rsd += phase_ref[m];
  return rsd;
}

double progress_derived_rsd(double t_el, double prog, const ProgressDerivedConfig& cfg) {
  if (prog <= cfg.prog_floor) return cfg.rsd_cap;
  const long double el = t_el;
  return std::max(0.0, static_cast<double>(el / static_cast<long double>(prog) - el));
}

std::vector<PredictionTrace> naive_traces(const synthsurg::Dataset& dataset, const std::vector<std::string>& ids,
                                          double t_ref) {
  std::vector<PredictionTrace> out;
  for (const auto& id : ids) {
    const auto& f = dataset.at(id).frames;
    PredictionTrace tr{id, f.elapsed_min, f.rsd_min, {}, {}};
    for (double el : f.elapsed_min) tr.rsd_pred.push_back(naive_rsd(el, t_ref));
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<PredictionTrace> phase_inferred_traces(const synthsurg::Dataset& dataset,
                                                   const std::vector<std::string>& ids, const ReferenceStats& stats,
                                                   Reference use) {
  const auto& ref = stats.phases(use);
  std::vector<PredictionTrace> out;
  for (const auto& id : ids) {
    const auto& s = dataset.at(id);
    const auto& f = s.frames;
    PredictionTrace tr{id, f.elapsed_min, f.rsd_min, {}, {}};
    for (const auto& seg : s.record.segments) {
      for (std::int64_t t = seg.start_frame; t < seg.end_frame; ++t) {
        const double in_phase = static_cast<double>(t - seg.start_frame + 1) * s.record.seconds_per_frame / 60.0;
        tr.rsd_pred.push_back(phase_inferred_rsd(seg.phase_id, in_phase, ref));
      }
    }
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<PredictionTrace> progress_derived_traces(const std::vector<PredictionTrace>& with_progress,
                                                     const ProgressDerivedConfig& cfg) {
  std::vector<PredictionTrace> out = with_progress;
  for (auto& tr : out) {
    if (!tr.has_progress()) throw InputError(tr.surgery_id + ": trace has no progress estimate");
    for (std::size_t t = 0; t < tr.size(); ++t)
      tr.rsd_pred[t] = progress_derived_rsd(tr.elapsed_min[t], tr.prog_pred[t], cfg);
  }
  return out;
}

}  // namespace rsdkit::baselines
