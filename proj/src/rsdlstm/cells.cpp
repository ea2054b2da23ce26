#include "rsdkit/rsdlstm/cells.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"
#include "rsdkit/common/stats.hpp"

namespace rsdkit::rsdlstm {

std::vector<double> CellDump::cell(std::size_t i) const {
  const std::size_t n = trace.size();
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = cells[t * hidden + i];
  return out;
}

CellDump dump_cell_activations(const RsdNet<float>& net, const synthsurg::FrameSequence& seq,
                               std::span<const float> features) {
  std::mt19937_64 unused(0);
  const std::vector<float> elapsed(seq.elapsed_min.begin(), seq.elapsed_min.end());
  SequenceCache<float> cache;
  const auto out = forward_sequence<float>(net, features, elapsed, numkernel::Mode::kEval, unused, &cache);
  CellDump d;
  d.surgery_id = seq.surgery_id;
  d.hidden = net.hidden();
  d.cells.assign(cache.lstm.c.begin(), cache.lstm.c.end());
  d.trace = {seq.surgery_id, seq.elapsed_min, seq.rsd_min, {}, {}};
  for (float r : out.rsd_raw) d.trace.rsd_pred.push_back(rsd_prediction(r, net.s_norm));
  d.trace.prog_pred.assign(out.prog.begin(), out.prog.end());
  return d;
}

std::string cells_to_csv(const CellDump& dump) {
  std::ostringstream os;
  os << "t";
  for (std::size_t i = 0; i < dump.hidden; ++i) os << ",c_" << (i + 1);
  os << ",rsd_pred,prog_pred\n";
  for (std::size_t t = 0; t < dump.trace.size(); ++t) {
    os << t;
    for (std::size_t i = 0; i < dump.hidden; ++i) os << fmt::format(",{:.9g}", dump.cells[t * dump.hidden + i]);
    os << fmt::format(",{:.17g},", dump.trace.rsd_pred[t]);
    if (dump.trace.has_progress()) os << fmt::format("{:.17g}", dump.trace.prog_pred[t]);
    os << "\n";
  }
  return os.str();
}

void write_cells_csv(const std::filesystem::path& path, const CellDump& dump) {
  write_file_atomic(path, cells_to_csv(dump));
}

std::vector<double> monotonicity(const CellDump& dump) {
  std::vector<double> t(dump.trace.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<double>(k);
  std::vector<double> out;
  for (std::size_t i = 0; i < dump.hidden; ++i) out.push_back(std::abs(stats::spearman(dump.cell(i), t)));
  return out;
}

std::vector<double> separation(const CellDump& dump, const std::vector<bool>& in_phase) {
  if (in_phase.size() != dump.trace.size()) throw DimensionError("phase mask length differs from the dump");
  std::vector<double> out;
  for (std::size_t i = 0; i < dump.hidden; ++i) {
    std::vector<double> in, outside;
    const auto c = dump.cell(i);
    for (std::size_t t = 0; t < c.size(); ++t) (in_phase[t] ? in : outside).push_back(c[t]);
    if (in.size() < 2 || outside.size() < 2) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double n1 = static_cast<double>(in.size()), n2 = static_cast<double>(outside.size());
    const double s1 = stats::population_std(in), s2 = stats::population_std(outside);
    // Sample variances from population ones.
    const double pooled = std::sqrt((n1 * s1 * s1 + n2 * s2 * s2) / (n1 + n2 - 2.0));
    const double gap = std::abs(stats::mean(in) - stats::mean(outside));
    out.push_back(pooled > 0.0 ? gap / pooled : (gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
  }
  return out;
}

CellSummary summarize_cells(const std::vector<std::vector<double>>& per_surgery) {
  CellSummary s;
  if (per_surgery.empty()) return s;
  const std::size_t h = per_surgery.front().size();
  for (std::size_t i = 0; i < h; ++i) {
    std::vector<double> vals;
    for (const auto& row : per_surgery)
      if (!std::isnan(row[i])) vals.push_back(row[i]);
    const double med = vals.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::quantile(vals, 0.5);
    s.per_cell_median.push_back(med);
    if (!std::isnan(med) && med > s.best_score) {
      s.best_score = med;
      s.best_cell = i;
    }
  }
  return s;
}

}  // namespace rsdkit::rsdlstm
