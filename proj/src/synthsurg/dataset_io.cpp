#include "rsdkit/synthsurg/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"

namespace rsdkit::synthsurg {

namespace {

constexpr int kLabelRows = 4;

std::vector<float> label_rows(const FrameSequence& f) {
  const auto n = static_cast<std::size_t>(f.n_frames);
  std::vector<float> out(kLabelRows * n);
  for (std::size_t t = 0; t < n; ++t) {
    out[t] = static_cast<float>(f.progress[t]);
    out[n + t] = static_cast<float>(f.rsd_min[t]);
    out[2 * n + t] = static_cast<float>(f.elapsed_min[t]);
    out[3 * n + t] = static_cast<float>(f.phase_id[t]);
  }
  return out;
}

}  // namespace

Json record_to_json(const SurgeryRecord& r) {
  Json segs = Json::array();
  for (const auto& s : r.segments) segs.push_back({s.phase_id, s.start_frame, s.end_frame});
  return {{"surgery_id", r.surgery_id},
          {"seed", r.seed},
          {"segments", segs},
          {"total_frames", r.total_frames},
          {"seconds_per_frame", r.seconds_per_frame},
          {"total_duration_T", r.total_duration_T},
          {"style", r.style}};
}

SurgeryRecord record_from_json(const Json& j) {
  SurgeryRecord r;
  r.surgery_id = j.at("surgery_id").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("segments"))
    r.segments.push_back({s.at(0).get<int>(), s.at(1).get<std::int64_t>(), s.at(2).get<std::int64_t>()});
  r.total_frames = j.at("total_frames").get<std::int64_t>();
  r.seconds_per_frame = j.at("seconds_per_frame").get<double>();
  r.total_duration_T = j.at("total_duration_T").get<double>();
  r.style = j.at("style").get<double>();
  r.validate();
  return r;
}

std::string serialize_dataset(const Dataset& dataset, const Json& extra) {
  ContainerWriter w("RSDS", kDatasetVersion);
  Json index = Json::array();
  for (const auto& s : dataset.surgeries) {
    const auto feat_off = w.append_f32(s.frames.features);
    const auto labels = label_rows(s.frames);
    const auto label_off = w.append_f32(labels);
    Json entry = record_to_json(s.record);
    entry["features_offset"] = feat_off;
    entry["labels_offset"] = label_off;
    index.push_back(std::move(entry));
  }
  Json header = extra;
  header["spec"] = dataset.spec.to_json();
  header["seed"] = dataset.seed;
  header["feature_dim"] = dataset.spec.feature_dim;
  header["label_rows"] = {"progress", "rsd_min", "elapsed_min", "phase_id"};
  header["surgeries"] = std::move(index);
  return w.serialize(header);
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset, const Json& extra) {
  write_file_atomic(path, serialize_dataset(dataset, extra));
}

Dataset read_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw PipelineOrderError("no dataset at " + path.string() + "; run `generate` first");
  ContainerReader reader(path, "RSDS");
  const Json& h = reader.header().header;
  Dataset ds;
  ds.spec = WorkflowSpec::from_json(h.at("spec"));
  ds.seed = h.at("seed").get<std::uint64_t>();
  const int dim = h.at("feature_dim").get<int>();
  for (const auto& entry : h.at("surgeries")) {
    Surgery s;
    s.record = record_from_json(entry);
    derive_labels(s.record, s.frames);
    const auto n = static_cast<std::uint64_t>(s.record.total_frames);
    s.frames.feature_dim = dim;
    s.frames.features = reader.read_f32(entry.at("features_offset").get<std::uint64_t>(), n * dim);
    const auto labels = reader.read_f32(entry.at("labels_offset").get<std::uint64_t>(), kLabelRows * n);
    for (std::uint64_t t = 0; t < n; ++t) {
      if (labels[t] != static_cast<float>(s.frames.progress[t]) ||
          labels[n + t] != static_cast<float>(s.frames.rsd_min[t]) ||
          labels[3 * n + t] != static_cast<float>(s.frames.phase_id[t]))
        throw FormatError(fmt::format("{}: stored labels disagree with the timeline at frame {}",
                                      s.record.surgery_id, t));
    }
    ds.surgeries.push_back(std::move(s));
  }
  return ds;
}

void export_csv(const std::filesystem::path& path, const Dataset& dataset) {
  std::ostringstream os;
  os << "surgery_id,t,phase_id,progress,elapsed_min,rsd_min";
  for (int d = 0; d < dataset.spec.feature_dim; ++d) os << ",f" << d;
  os << "\n";
  for (const auto& s : dataset.surgeries) {
    const auto& f = s.frames;
    for (std::int64_t t = 0; t < f.n_frames; ++t) {
      os << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g}", f.surgery_id, t, f.phase_id[t], f.progress[t],
                        f.elapsed_min[t], f.rsd_min[t]);
      const float* row = f.frame(t);
      for (int d = 0; d < f.feature_dim; ++d) os << fmt::format(",{:.9g}", row[d]);
      os << "\n";
    }
  }
  write_file_atomic(path, os.str());
}

void export_jsonl(const std::filesystem::path& path, const Dataset& dataset) {
  std::ostringstream os;
  for (const auto& s : dataset.surgeries) {
    const auto& f = s.frames;
    for (std::int64_t t = 0; t < f.n_frames; ++t) {
      const float* row = f.frame(t);
      Json j = {{"surgery_id", f.surgery_id}, {"t", t},
                {"phase_id", f.phase_id[t]},  {"progress", f.progress[t]},
                {"elapsed_min", f.elapsed_min[t]}, {"rsd_min", f.rsd_min[t]},
                {"features", std::vector<float>(row, row + f.feature_dim)}};
      os << j.dump() << "\n";
    }
  }
  write_file_atomic(path, os.str());
}

}  // namespace rsdkit::synthsurg
