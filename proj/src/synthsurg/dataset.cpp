#include "rsdkit/synthsurg/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "rsdkit/common/error.hpp"
#include "rsdkit/common/hash.hpp"

namespace rsdkit::synthsurg {

namespace {

constexpr int kMaxRedraws = 10000;

double minutes(std::int64_t frames, double seconds_per_frame) {
  return static_cast<double>(frames) * seconds_per_frame / 60.0;
}

}  // namespace

double SurgeryRecord::segment_minutes(std::size_t k) const {
  return minutes(segments.at(k).frames(), seconds_per_frame);
}

void SurgeryRecord::validate() const {
  if (segments.empty()) throw InputError(surgery_id + ": no segments");
  std::int64_t expect = 0;
  int last_phase = -1;
  for (const auto& s : segments) {
    if (s.start_frame != expect || s.end_frame <= s.start_frame)
      throw InputError(surgery_id + ": segments must be contiguous and non-empty");
    if (s.phase_id <= last_phase) throw InputError(surgery_id + ": phase ids must strictly increase");
    last_phase = s.phase_id;
    expect = s.end_frame;
  }
  if (expect != total_frames) throw InputError(surgery_id + ": segments do not cover [0, total_frames)");
}

const Surgery& Dataset::at(const std::string& surgery_id) const { return surgeries[index_of(surgery_id)]; }

std::size_t Dataset::index_of(const std::string& surgery_id) const {
  for (std::size_t i = 0; i < surgeries.size(); ++i)
    if (surgeries[i].record.surgery_id == surgery_id) return i;
  throw InputError("unknown surgery id '" + surgery_id + "'");
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(surgeries.size());
  for (const auto& s : surgeries) out.push_back(s.record.surgery_id);
  return out;
}

void derive_labels(const SurgeryRecord& record, FrameSequence& out) {
  const std::int64_t n = record.total_frames;
  const double spf = record.seconds_per_frame;
  const double total = minutes(n, spf);
  out.surgery_id = record.surgery_id;
  out.n_frames = n;
  out.progress.resize(static_cast<std::size_t>(n));
  out.rsd_min.resize(static_cast<std::size_t>(n));
  out.elapsed_min.resize(static_cast<std::size_t>(n));
  out.phase_id.resize(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    out.progress[i] = static_cast<double>(t + 1) / static_cast<double>(n);
    out.elapsed_min[i] = minutes(t + 1, spf);
    out.rsd_min[i] = total - out.elapsed_min[i];
  }
  for (const auto& s : record.segments)
    for (std::int64_t t = s.start_frame; t < s.end_frame; ++t) out.phase_id[static_cast<std::size_t>(t)] = s.phase_id;
}

FrameSequence derive_labels(const SurgeryRecord& record) {
  FrameSequence fs;
  derive_labels(record, fs);
  return fs;
}

SurgeryRecord generate_record(const WorkflowSpec& spec, const std::string& surgery_id, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SurgeryRecord rec;
  rec.surgery_id = surgery_id;
  rec.seed = seed;
  rec.seconds_per_frame = spec.seconds_per_frame();
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    rec.segments.clear();
    rec.style = std::exp(spec.style_sigma * normal(rng));
    std::int64_t frame = 0;
    for (int m = 0; m < spec.n_phases; ++m) {
      const auto& pd = spec.phase_duration[static_cast<std::size_t>(m)];
      // Draw both numbers for every phase so skips do not shift the stream.
      const double u = unif(rng);
      const double z = normal(rng);
      if (u < spec.skip_probs[static_cast<std::size_t>(m)]) continue;
      const double seconds = std::exp(pd.mu + pd.sigma * z) * rec.style;
      const auto frames = std::max<std::int64_t>(1, std::llround(seconds * spec.time_scale / spec.frame_period_s));
      rec.segments.push_back({m, frame, frame + frames});
      frame += frames;
    }
    rec.total_frames = frame;
    rec.total_duration_T = minutes(frame, rec.seconds_per_frame);
    if (spec.max_duration_min <= 0.0 || rec.total_duration_T <= spec.max_duration_min) return rec;
  }
  throw ConfigError("workflow spec: could not draw a surgery shorter than max_duration_min");
}

Dataset generate_dataset(const WorkflowSpec& spec, int n_surgeries, std::uint64_t seed) {
  spec.validate();
  if (n_surgeries < 1) throw ConfigError("n_surgeries >= 1 violated");
  Dataset ds;
  ds.spec = spec;
  ds.seed = seed;
  ds.surgeries.resize(static_cast<std::size_t>(n_surgeries));
  const int d = spec.feature_dim;
  const int tools = spec.n_tools();
  const int cue = spec.cue_channel();
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n_surgeries; ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%04d", spec.name.c_str(), i);
    auto& s = ds.surgeries[static_cast<std::size_t>(i)];
    s.record = generate_record(spec, id, mix_seed(seed, static_cast<std::uint64_t>(i)));
    derive_labels(s.record, s.frames);
    auto& fs = s.frames;
    fs.feature_dim = d;
    fs.features.assign(static_cast<std::size_t>(fs.n_frames * d), 0.0f);
    std::mt19937_64 rng(mix_seed(s.record.seed, "features"));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::int64_t t = 0; t < fs.n_frames; ++t) {
      const int m = fs.phase_id[static_cast<std::size_t>(t)];
      float* row = fs.features.data() + t * d;
      row[m] = 1.0f;
      const auto& tp = spec.tool_probs[static_cast<std::size_t>(m)];
      for (int k = 0; k < tools; ++k) row[spec.n_phases + k] = unif(rng) < tp[static_cast<std::size_t>(k)] ? 1.0f : 0.0f;
      row[cue] = m == spec.end_signal_phase ? 1.0f : 0.0f;
      // The cue channel stays noise-free: exactly 0 outside end_signal_phase.
      for (int k = 0; k < d; ++k) {
        const double z = normal(rng);
        if (k != cue) row[k] += static_cast<float>(spec.noise_sigma * z);
      }
    }
  }
  return ds;
}

}  // namespace rsdkit::synthsurg
