#include "rsdkit/evalkit/evaluation.hpp"

#include <cmath>
#include <exception>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "rsdkit/common/error.hpp"
#include "rsdkit/common/stats.hpp"

namespace rsdkit::evalkit {

using rsdlstm::PredictionTrace;

namespace {

constexpr const char* kSpanNames[kSpans] = {"Q1", "Q2", "Q3", "Q4", "full"};

Summary pooled(std::size_t n, long double sum, long double sumsq) {
  Summary s;
  if (n == 0) return s;
  s.defined = true;
  s.n = n;
  const long double m = sum / static_cast<long double>(n);
  s.mean = static_cast<double>(m);
  const long double var = sumsq / static_cast<long double>(n) - m * m;
  s.std = static_cast<double>(std::sqrt(std::max(0.0L, var)));
  return s;
}

std::string fmt_summary(const Summary& s) {
  return s.defined ? fmt::format("{:.2f} ± {:.2f}", s.mean, s.std) : std::string("undefined");
}

std::vector<CurvePoint> curve(const std::vector<const SurgeryEval*>& members, bool reliability) {
  std::vector<CurvePoint> out;
  for (std::size_t k = 0; k < kCurvePoints.size(); ++k) {
    std::vector<double> errs;
    std::size_t excluded = 0;
    for (const auto* s : members) {
      const auto& v = reliability ? s->reliability[k] : s->accuracy[k];
      if (v) errs.push_back(*v);
      else ++excluded;
    }
    out.push_back({kCurvePoints[k], Summary::of(errs), excluded});
  }
  return out;
}

}  // namespace

std::string cohort_name(Cohort c) {
  switch (c) {
    case Cohort::kComplete: return "complete";
    case Cohort::kShort: return "short";
    case Cohort::kMedium: return "medium";
    case Cohort::kLong: return "long";
  }
  return "unknown";
}

bool in_cohort(Category cat, Cohort c) {
  switch (c) {
    case Cohort::kComplete: return true;
    case Cohort::kShort: return cat == Category::kShort;
    case Cohort::kMedium: return cat == Category::kMedium;
    case Cohort::kLong: return cat == Category::kLong;
  }
  return false;
}

Category categorize(double T, double q1, double q3) {
  if (T < q1) return Category::kShort;
  if (T > q3) return Category::kLong;
  return Category::kMedium;
}

Quartiles Quartiles::from_dataset(const synthsurg::Dataset& dataset) {
  Quartiles q;
  std::vector<double> ts;
  for (const auto& s : dataset.surgeries) {
    ts.push_back(s.record.total_duration_T);
    q.duration[s.record.surgery_id] = s.record.total_duration_T;
  }
  q.q1 = stats::quantile(ts, 0.25);
  q.q3 = stats::quantile(ts, 0.75);
  return q;
}

Category Quartiles::category_of(const std::string& id) const {
  const auto it = duration.find(id);
  if (it == duration.end()) throw InputError("surgery '" + id + "' is not in the dataset");
  return categorize(it->second, q1, q3);
}

Summary Summary::of(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  s.defined = true;
  s.n = xs.size();
  s.mean = stats::mean(xs);
  s.std = stats::population_std(xs);
  return s;
}

nlohmann::json Summary::to_json() const {
  if (!defined) return {{"defined", false}, {"n", 0}};
  return {{"defined", true}, {"mean", mean}, {"std", std}, {"n", n}};
}

std::optional<double> reliability_error(const PredictionTrace& tr, double tau) {
  std::optional<double> out;
  for (std::size_t t = 0; t < tr.size(); ++t)
    if (tr.rsd_pred[t] <= tau && (t == 0 || tr.rsd_pred[t - 1] > tau)) out = std::abs(tr.rsd_true[t] - tr.rsd_pred[t]);
  return out;
}

std::optional<double> accuracy_error(const PredictionTrace& tr, double g) {
  if (tr.size() == 0) return std::nullopt;
  const double half_period = tr.elapsed_min[0] / 2.0;
  std::size_t best = 0;
  double best_gap = std::abs(tr.rsd_true[0] - g);
  for (std::size_t t = 1; t < tr.size(); ++t) {
    const double gap = std::abs(tr.rsd_true[t] - g);
    if (gap < best_gap) {
      best_gap = gap;
      best = t;
    }
  }
  if (best_gap > half_period) return std::nullopt;
  return std::abs(tr.rsd_pred[best] - g);
}

std::array<SpanStats, kSpans> span_stats(const PredictionTrace& tr) {
  std::array<SpanStats, kSpans> out{};
  const std::size_t n = tr.size();
  for (std::size_t q = 0; q < kSpans; ++q) {
    const std::size_t lo = q < 4 ? q * n / 4 : 0;
    const std::size_t hi = q < 4 ? (q + 1) * n / 4 : n;
    auto& s = out[q];
    for (std::size_t t = lo; t < hi; ++t) {
      const long double e = static_cast<long double>(tr.rsd_pred[t]) - tr.rsd_true[t];
      ++s.n;
      s.sum_abs += std::abs(e);
      if (e < 0) {
        ++s.n_under;
        s.sum_under += e;
        s.sumsq_under += e * e;
      } else if (e > 0) {
        ++s.n_over;
        s.sum_over += e;
        s.sumsq_over += e * e;
      } else {
        ++s.n_exact;
      }
    }
  }
  return out;
}

SurgeryEval evaluate_surgery(const PredictionTrace& tr, const Quartiles& quartiles) {
  tr.validate();
  SurgeryEval s;
  s.surgery_id = tr.surgery_id;
  s.duration = quartiles.duration.at(tr.surgery_id);
  s.category = categorize(s.duration, quartiles.q1, quartiles.q3);
  s.spans = span_stats(tr);
  s.mae = static_cast<double>(s.spans[4].sum_abs / static_cast<long double>(tr.size()));
  for (double x : kCurvePoints) {
    s.reliability.push_back(reliability_error(tr, x));
    s.accuracy.push_back(accuracy_error(tr, x));
  }
  return s;
}

MethodEval evaluate_method(const std::string& method, const std::vector<PredictionTrace>& traces,
                           const Quartiles& quartiles) {
  MethodEval out;
  out.method = method;
  out.surgeries.resize(traces.size());
  for (const auto& tr : traces)
    if (quartiles.duration.count(tr.surgery_id) == 0) throw InputError("surgery '" + tr.surgery_id + "' is not in the dataset");
  const auto n = static_cast<std::ptrdiff_t>(traces.size());
  std::vector<std::exception_ptr> errors(traces.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out.surgeries[static_cast<std::size_t>(i)] = evaluate_surgery(traces[static_cast<std::size_t>(i)], quartiles);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

MethodReport summarize(const MethodEval& eval) {
  MethodReport r;
  r.method = eval.method;
  for (Cohort c : kCohorts) {
    std::vector<const SurgeryEval*> members;
    for (const auto& s : eval.surgeries)
      if (in_cohort(s.category, c)) members.push_back(&s);
    CohortReport cr;
    std::vector<double> maes;
    for (const auto* s : members) maes.push_back(s->mae);
    cr.mae = Summary::of(maes);
    cr.reliability = curve(members, true);
    cr.accuracy = curve(members, false);
    for (std::size_t q = 0; q < kSpans; ++q) {
      SpanStats tot;
      std::vector<double> span_maes;
      for (const auto* s : members) {
        const auto& sp = s->spans[q];
        tot.n += sp.n;
        tot.n_under += sp.n_under;
        tot.n_over += sp.n_over;
        tot.n_exact += sp.n_exact;
        tot.sum_under += sp.sum_under;
        tot.sumsq_under += sp.sumsq_under;
        tot.sum_over += sp.sum_over;
        tot.sumsq_over += sp.sumsq_over;
        if (sp.n) span_maes.push_back(static_cast<double>(sp.sum_abs / static_cast<long double>(sp.n)));
      }
      auto& row = cr.spans[q];
      row.n_steps = tot.n;
      row.under = pooled(tot.n_under, tot.sum_under, tot.sumsq_under);
      row.over = pooled(tot.n_over, tot.sum_over, tot.sumsq_over);
      if (tot.n) {
        const auto n = static_cast<double>(tot.n);
        row.under_fraction = static_cast<double>(tot.n_under) / n;
        row.over_fraction = static_cast<double>(tot.n_over) / n;
        row.exact_fraction = static_cast<double>(tot.n_exact) / n;
      }
      row.mae = Summary::of(span_maes);
    }
    r.cohorts[c] = std::move(cr);
  }
  return r;
}

MethodEval aggregate_folds(const std::vector<MethodEval>& folds) {
  MethodEval out;
  if (folds.empty()) return out;
  out.method = folds.front().method;
  std::set<std::string> seen;
  for (const auto& f : folds) {
    if (f.method != out.method) throw ProtocolError("cannot pool folds of different methods");
    for (const auto& s : f.surgeries) {
      if (!seen.insert(s.surgery_id).second)
        throw ProtocolError("surgery '" + s.surgery_id + "' is evaluated in more than one fold");
      out.surgeries.push_back(s);
    }
  }
  return out;
}

EvalReport build_report(const Quartiles& quartiles, const std::vector<MethodEval>& evals) {
  EvalReport r;
  r.q1 = quartiles.q1;
  r.q3 = quartiles.q3;
  r.n_dataset = quartiles.duration.size();
  for (const auto& e : evals) r.methods.push_back(summarize(e));
  return r;
}

const MethodReport& EvalReport::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw InputError("report has no method '" + name + "'");
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = {{"q1", q1}, {"q3", q3}, {"n_dataset", n_dataset}, {"methods", nlohmann::json::array()}};
  for (const auto& m : methods) {
    nlohmann::json jm = {{"method", m.method}};
    for (const auto& [c, cr] : m.cohorts) {
      nlohmann::json jc = {{"mae", cr.mae.to_json()}};
      for (const auto* which : {&cr.reliability, &cr.accuracy}) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : *which)
          pts.push_back({{"x", p.x}, {"error", p.error.to_json()}, {"n_excluded", p.n_excluded}});
        jc[which == &cr.reliability ? "reliability" : "accuracy"] = pts;
      }
      nlohmann::json spans = nlohmann::json::object();
      for (std::size_t q = 0; q < kSpans; ++q) {
        const auto& row = cr.spans[q];
        spans[kSpanNames[q]] = {{"under", row.under.to_json()},
                                {"over", row.over.to_json()},
                                {"under_fraction", row.under_fraction},
                                {"over_fraction", row.over_fraction},
                                {"exact_fraction", row.exact_fraction},
                                {"mae", row.mae.to_json()},
                                {"n_steps", row.n_steps}};
      }
      jc["under_over"] = spans;
      jm[cohort_name(c)] = jc;
    }
    j["methods"].push_back(jm);
  }
  return j;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  std::size_t w = 8;
  for (const auto& m : methods) w = std::max(w, m.method.size());
  os << fmt::format("RSD MAE in minutes (mean ± std over surgeries); Q1 = {:.2f}, Q3 = {:.2f}\n", q1, q3);
  os << fmt::format("{:<{}}", "method", w);
  for (Cohort c : kCohorts) os << fmt::format("  {:>16}", cohort_name(c));
  os << "\n";
  for (const auto& m : methods) {
    os << fmt::format("{:<{}}", m.method, w);
    for (Cohort c : kCohorts) os << fmt::format("  {:>16}", fmt_summary(m.cohorts.at(c).mae));
    os << "\n";
  }
  os << "\nUnder/over-estimation by quarter (signed error mean ± std, fraction of time steps)\n";
  for (const auto& m : methods) {
    for (Cohort c : kCohorts) {
      const auto& cr = m.cohorts.at(c);
      os << fmt::format("{} / {}\n", m.method, cohort_name(c));
      for (std::size_t q = 0; q < kSpans; ++q) {
        const auto& row = cr.spans[q];
        os << fmt::format("  {:<5} under {:>16} ({:.2f})  over {:>16} ({:.2f})  mae {:>16}\n", kSpanNames[q],
                          fmt_summary(row.under), row.under_fraction, fmt_summary(row.over), row.over_fraction,
                          fmt_summary(row.mae));
      }
    }
  }
  return os.str();
}

std::string EvalReport::curves_csv() const {
  std::ostringstream os;
  os << "method,cohort,curve,x,mae_mean,mae_std,n_defined,n_excluded\n";
  for (const auto& m : methods)
    for (const auto& [c, cr] : m.cohorts)
      for (const auto* which : {&cr.reliability, &cr.accuracy})
        for (const auto& p : *which) {
          os << fmt::format("{},{},{},{:g},", m.method, cohort_name(c),
                            which == &cr.reliability ? "reliability" : "accuracy", p.x);
          if (p.error.defined) os << fmt::format("{:.17g},{:.17g}", p.error.mean, p.error.std);
          else os << ",";
          os << fmt::format(",{},{}\n", p.error.n, p.n_excluded);
        }
  return os.str();
}

}  // namespace rsdkit::evalkit
