#include "rsdkit/rsdlstm/trace.hpp"

#include <sstream>

#include <json.hpp>

#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"

namespace rsdkit::rsdlstm {

void PredictionTrace::validate() const {
  const auto n = rsd_true.size();
  if (elapsed_min.size() != n || rsd_pred.size() != n || (!prog_pred.empty() && prog_pred.size() != n))
    throw InputError(surgery_id + ": trace columns differ in length");
  for (double v : rsd_pred)
    if (!(v >= 0.0)) throw InputError(surgery_id + ": rsd_pred must be finite and >= 0");
}

std::string traces_to_jsonl(const std::vector<PredictionTrace>& traces) {
  std::ostringstream os;
  for (const auto& tr : traces) {
    tr.validate();
    for (std::size_t t = 0; t < tr.size(); ++t) {
      Json j = {{"surgery_id", tr.surgery_id},
                {"t", t},
                {"elapsed_min", tr.elapsed_min[t]},
                {"rsd_true", tr.rsd_true[t]},
                {"rsd_pred", tr.rsd_pred[t]}};
      if (tr.has_progress()) j["prog_pred"] = tr.prog_pred[t];
      os << j.dump() << "\n";
    }
  }
  return os.str();
}

void write_traces(const std::filesystem::path& path, const std::vector<PredictionTrace>& traces) {
  write_file_atomic(path, traces_to_jsonl(traces));
}

std::vector<PredictionTrace> read_traces(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw PipelineOrderError("no trace file at " + path.string());
  std::istringstream in(read_file(path));
  std::vector<PredictionTrace> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const auto id = j.at("surgery_id").get<std::string>();
    if (out.empty() || out.back().surgery_id != id) {
      out.emplace_back();
      out.back().surgery_id = id;
    }
    auto& tr = out.back();
    if (j.at("t").get<std::size_t>() != tr.size())
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": frames of a surgery must be consecutive");
    tr.elapsed_min.push_back(j.at("elapsed_min").get<double>());
    tr.rsd_true.push_back(j.at("rsd_true").get<double>());
    tr.rsd_pred.push_back(j.at("rsd_pred").get<double>());
    if (j.contains("prog_pred")) tr.prog_pred.push_back(j.at("prog_pred").get<double>());
  }
  for (const auto& tr : out) tr.validate();
  return out;
}

}  // namespace rsdkit::rsdlstm
