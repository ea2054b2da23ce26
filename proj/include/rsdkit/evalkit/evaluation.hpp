#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsdkit/rsdlstm/trace.hpp"
#include "rsdkit/synthsurg/dataset.hpp"

namespace rsdkit::evalkit {

enum class Category { kShort, kMedium, kLong };
/// Cohorts reported in every table, in order.
enum class Cohort { kComplete, kShort, kMedium, kLong };
inline constexpr std::array<Cohort, 4> kCohorts = {Cohort::kComplete, Cohort::kShort, Cohort::kMedium, Cohort::kLong};

std::string cohort_name(Cohort c);
bool in_cohort(Category cat, Cohort c);

/// short: T < q1, long: T > q3, medium otherwise (ties go to medium).
Category categorize(double T, double q1, double q3);

/// Dataset duration quartiles and per-surgery durations.
struct Quartiles {
  double q1 = 0.0;
  double q3 = 0.0;
  std::map<std::string, double> duration;

  static Quartiles from_dataset(const synthsurg::Dataset& dataset);
  Category category_of(const std::string& id) const;
};

/// Mean and population std over a set of values; undefined when empty.
struct Summary {
  bool defined = false;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;

  static Summary of(const std::vector<double>& xs);
  nlohmann::json to_json() const;
};

inline constexpr std::array<double, 6> kCurvePoints = {5, 10, 15, 20, 25, 30};

/// Error at the last frame where rsd_pred crosses down to <= tau
/// (pred[t] <= tau and (t == 0 or pred[t-1] > tau)); nullopt when never reached.
std::optional<double> reliability_error(const rsdlstm::PredictionTrace& tr, double tau);
/// |rsd_pred - g| at the frame whose rsd_true is nearest to g, if that frame
/// is within half a frame period of g; nullopt otherwise.
std::optional<double> accuracy_error(const rsdlstm::PredictionTrace& tr, double g);

/// Time-step counts and signed-error sums over one span of a surgery.
struct SpanStats {
  std::size_t n = 0, n_under = 0, n_over = 0, n_exact = 0;
  long double sum_abs = 0, sum_under = 0, sumsq_under = 0, sum_over = 0, sumsq_over = 0;
};

/// Quarters are frame spans [q*n/4, (q+1)*n/4); index 4 is the whole surgery.
inline constexpr std::size_t kSpans = 5;
std::array<SpanStats, kSpans> span_stats(const rsdlstm::PredictionTrace& tr);

/// Everything the report needs from one surgery.
struct SurgeryEval {
  std::string surgery_id;
  double duration = 0.0;
  Category category = Category::kMedium;
  double mae = 0.0;
  std::vector<std::optional<double>> reliability;  // per kCurvePoints entry
  std::vector<std::optional<double>> accuracy;
  std::array<SpanStats, kSpans> spans;
};

SurgeryEval evaluate_surgery(const rsdlstm::PredictionTrace& tr, const Quartiles& quartiles);

/// Per-surgery evaluations of one method (pooled over folds if aggregated).
struct MethodEval {
  std::string method;
  std::vector<SurgeryEval> surgeries;
};

/// Parallel across surgeries; results kept in trace order. Throws
/// InputError when a trace is missing frames of its surgery.
MethodEval evaluate_method(const std::string& method, const std::vector<rsdlstm::PredictionTrace>& traces,
                           const Quartiles& quartiles);

struct CurvePoint {
  double x = 0.0;
  Summary error;
  std::size_t n_excluded = 0;
};

struct SpanRow {
  Summary under;  // negative errors, pooled over time steps
  Summary over;   // positive errors, pooled over time steps
  double under_fraction = 0.0, over_fraction = 0.0, exact_fraction = 0.0;
  Summary mae;    // over per-surgery span MAEs
  std::size_t n_steps = 0;
};

struct CohortReport {
  Summary mae;  // over per-surgery MAEs
  std::vector<CurvePoint> reliability;
  std::vector<CurvePoint> accuracy;
  std::array<SpanRow, kSpans> spans;
};

struct MethodReport {
  std::string method;
  std::map<Cohort, CohortReport> cohorts;
};

MethodReport summarize(const MethodEval& eval);

/// Concatenates per-fold evaluations of the same method. Throws ProtocolError
/// when a surgery appears in more than one fold.
MethodEval aggregate_folds(const std::vector<MethodEval>& folds);

struct EvalReport {
  double q1 = 0.0, q3 = 0.0;
  std::size_t n_dataset = 0;
  std::vector<MethodReport> methods;

  const MethodReport& method(const std::string& name) const;
  nlohmann::json to_json() const;
  /// Aligned text tables: MAE by cohort, then the under/over table.
  std::string to_text() const;
  /// method, cohort, curve, x, mae_mean, mae_std, n_defined, n_excluded
  std::string curves_csv() const;
};

EvalReport build_report(const Quartiles& quartiles, const std::vector<MethodEval>& evals);

}  // namespace rsdkit::evalkit
