#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rsdkit/synthsurg/dataset.hpp"
#include "rsdkit/synthsurg/workflow.hpp"

namespace rsdkit::test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("rsdkit_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Workflow spec with n phases, no tools, no noise; enough for hand-built
// fixtures that never go through the generator.
inline synthsurg::WorkflowSpec toy_spec(int n_phases, double frame_period_s = 60.0) {
  synthsurg::WorkflowSpec s;
  s.name = "toy";
  s.n_phases = n_phases;
  s.phase_duration.assign(static_cast<std::size_t>(n_phases), {1.0, 0.0});
  s.skip_probs.assign(static_cast<std::size_t>(n_phases), 0.0);
  s.tool_probs.assign(static_cast<std::size_t>(n_phases), std::vector<double>{});
  s.end_signal_phase = n_phases - 1;
  s.feature_dim = n_phases + 1;
  s.frame_period_s = frame_period_s;
  return s;
}

// Record whose phase m lasts frames_per_phase[m] frames; 0 skips the phase.
inline synthsurg::SurgeryRecord toy_record(const std::string& id, const std::vector<std::int64_t>& frames_per_phase,
                                          double seconds_per_frame = 60.0) {
  synthsurg::SurgeryRecord r;
  r.surgery_id = id;
  std::int64_t t = 0;
  for (std::size_t m = 0; m < frames_per_phase.size(); ++m) {
    if (frames_per_phase[m] == 0) continue;
    r.segments.push_back({static_cast<int>(m), t, t + frames_per_phase[m]});
    t += frames_per_phase[m];
  }
  r.total_frames = t;
  r.seconds_per_frame = seconds_per_frame;
  r.total_duration_T = static_cast<double>(t) * seconds_per_frame / 60.0;
  return r;
}

inline synthsurg::Dataset toy_dataset(const synthsurg::WorkflowSpec& spec,
                                      const std::vector<synthsurg::SurgeryRecord>& records) {
  synthsurg::Dataset ds;
  ds.spec = spec;
  for (const auto& r : records) {
    synthsurg::Surgery s{r, synthsurg::derive_labels(r)};
    s.frames.feature_dim = spec.feature_dim;
    s.frames.features.assign(static_cast<std::size_t>(r.total_frames * spec.feature_dim), 0.0f);
    for (std::int64_t t = 0; t < r.total_frames; ++t)
      s.frames.features[static_cast<std::size_t>(t * spec.feature_dim + s.frames.phase_id[static_cast<std::size_t>(t)])] = 1.0f;
    ds.surgeries.push_back(std::move(s));
  }
  return ds;
}

// Durations in minutes at one frame per minute.
inline synthsurg::Dataset toy_durations(const std::vector<std::int64_t>& minutes) {
  std::vector<synthsurg::SurgeryRecord> recs;
  for (std::size_t i = 0; i < minutes.size(); ++i)
    recs.push_back(toy_record("s" + std::to_string(i), {minutes[i] / 2, minutes[i] - minutes[i] / 2}));
  return toy_dataset(toy_spec(2), recs);
}

}  // namespace rsdkit::test
