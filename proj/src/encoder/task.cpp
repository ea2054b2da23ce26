#include "rsdkit/encoder/task.hpp"

#include <algorithm>
#include <cmath>

#include "rsdkit/common/error.hpp"

namespace rsdkit::encoder {

namespace {

struct KindName {
  TaskKind kind;
  const char* name;
};

constexpr KindName kNames[] = {
    {TaskKind::kRsdClassification, "rsd-classification"},
    {TaskKind::kProgressClassification, "progress-classification"},
    {TaskKind::kRsdRegression, "rsd-regression"},
    {TaskKind::kProgressRegression, "progress-regression"},
    {TaskKind::kPhaseClassification, "phase-classification"},
};

}  // namespace

EncoderTask EncoderTask::progress_regression() { return EncoderTask{}; }

EncoderTask EncoderTask::rsd_regression(double s_norm) {
  EncoderTask t;
  t.kind = TaskKind::kRsdRegression;
  t.s_norm = s_norm;
  return t;
}

EncoderTask EncoderTask::rsd_classification(double bin_width_min, int max_bins) {
  EncoderTask t;
  t.kind = TaskKind::kRsdClassification;
  t.bin_width_min = bin_width_min;
  t.max_bins = max_bins;
  return t;
}

EncoderTask EncoderTask::progress_classification(int n_classes) {
  EncoderTask t;
  t.kind = TaskKind::kProgressClassification;
  t.n_classes = n_classes;
  return t;
}

EncoderTask EncoderTask::phase_classification(int n_phases) {
  EncoderTask t;
  t.kind = TaskKind::kPhaseClassification;
  t.n_classes = n_phases;
  return t;
}

bool EncoderTask::is_classification() const {
  return kind != TaskKind::kRsdRegression && kind != TaskKind::kProgressRegression;
}

int EncoderTask::output_dim() const {
  switch (kind) {
    case TaskKind::kRsdClassification: return max_bins;
    case TaskKind::kProgressClassification:
    case TaskKind::kPhaseClassification: return n_classes;
    default: return 1;
  }
}

void EncoderTask::validate() const {
  switch (kind) {
    case TaskKind::kRsdClassification:
      if (!(bin_width_min > 0.0) || max_bins < 2) throw ConfigError("rsd classification needs bin width > 0 and >= 2 bins");
      break;
    case TaskKind::kProgressClassification:
    case TaskKind::kPhaseClassification:
      if (n_classes < 2) throw ConfigError("classification needs >= 2 classes");
      break;
    case TaskKind::kRsdRegression:
      if (!(s_norm > 0.0)) throw ConfigError("s_norm > 0 violated");
      break;
    case TaskKind::kProgressRegression: break;
  }
}

std::string EncoderTask::name() const {
  for (const auto& kn : kNames)
    if (kn.kind == kind) return kn.name;
  return "unknown";
}

EncoderTask EncoderTask::parse(const std::string& name, double s_norm, int n_phases) {
  std::string key = name;
  std::replace(key.begin(), key.end(), '_', '-');
  if (key == "progress-regression") return progress_regression();
  if (key == "rsd-regression") return rsd_regression(s_norm);
  if (key == "rsd-classification") return rsd_classification();
  if (key == "progress-classification") return progress_classification();
  if (key == "phase-classification") return phase_classification(n_phases);
  throw ConfigError("unknown encoder task '" + name + "'");
}

nlohmann::json EncoderTask::to_json() const {
  nlohmann::json j = {{"kind", name()}};
  switch (kind) {
    case TaskKind::kRsdClassification:
      j["bin_width_min"] = bin_width_min;
      j["max_bins"] = max_bins;
      break;
    case TaskKind::kProgressClassification:
    case TaskKind::kPhaseClassification: j["n_classes"] = n_classes; break;
    case TaskKind::kRsdRegression: j["s_norm"] = s_norm; break;
    case TaskKind::kProgressRegression: break;
  }
  return j;
}

EncoderTask EncoderTask::from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  EncoderTask t = parse(kind, j.value("s_norm", 1.0), j.value("n_classes", 2));
  if (t.kind == TaskKind::kRsdClassification) {
    t.bin_width_min = j.at("bin_width_min").get<double>();
    t.max_bins = j.at("max_bins").get<int>();
  }
  if (t.kind == TaskKind::kProgressClassification) t.n_classes = j.at("n_classes").get<int>();
  t.validate();
  return t;
}

TaskTarget label_for_task(const EncoderTask& task, double progress, double rsd_min, int phase_id) {
  TaskTarget out;
  switch (task.kind) {
    case TaskKind::kRsdClassification: {
      const double bin = std::floor(std::max(0.0, rsd_min) / task.bin_width_min);
      out.cls = static_cast<int>(std::min(bin, static_cast<double>(task.max_bins - 1)));
      break;
    }
    case TaskKind::kProgressClassification: {
      const double cls = std::floor(std::max(0.0, progress) * task.n_classes);
      out.cls = static_cast<int>(std::min(cls, static_cast<double>(task.n_classes - 1)));
      break;
    }
    case TaskKind::kPhaseClassification:
      if (phase_id < 0 || phase_id >= task.n_classes) throw IndexError("phase id outside the class range");
      out.cls = phase_id;
      break;
    case TaskKind::kRsdRegression: out.value = rsd_min / task.s_norm; break;
    case TaskKind::kProgressRegression: out.value = progress; break;
  }
  return out;
}

}  // namespace rsdkit::encoder
