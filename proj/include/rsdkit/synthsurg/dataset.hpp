#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsdkit/synthsurg/workflow.hpp"

namespace rsdkit::synthsurg {

/// Frames [start_frame, end_frame) belong to phase_id (0-based).
struct PhaseSegment {
  int phase_id = 0;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;

  std::int64_t frames() const { return end_frame - start_frame; }
  bool operator==(const PhaseSegment&) const = default;
};

struct SurgeryRecord {
  std::string surgery_id;
  std::uint64_t seed = 0;
  std::vector<PhaseSegment> segments;  // contiguous, phase ids strictly increasing
  std::int64_t total_frames = 0;
  double seconds_per_frame = 1.0;      // simulated seconds per frame
  double total_duration_T = 0.0;       // minutes: total_frames * seconds_per_frame / 60
  double style = 1.0;

  /// Minutes from the start of segment k to its end.
  double segment_minutes(std::size_t k) const;
  void validate() const;
};

/// Per-frame features and the labels derived from the surgery timeline.
struct FrameSequence {
  std::string surgery_id;
  std::int64_t n_frames = 0;
  int feature_dim = 0;
  std::vector<float> features;     // n_frames x feature_dim
  std::vector<double> progress;    // (t + 1) / n_frames
  std::vector<double> rsd_min;     // T - elapsed
  std::vector<double> elapsed_min; // (t + 1) * seconds_per_frame / 60
  std::vector<int> phase_id;

  const float* frame(std::int64_t t) const { return features.data() + t * feature_dim; }
};

struct Surgery {
  SurgeryRecord record;
  FrameSequence frames;
};

struct Dataset {
  WorkflowSpec spec;
  std::uint64_t seed = 0;
  std::vector<Surgery> surgeries;

  const Surgery& at(const std::string& surgery_id) const;
  std::size_t index_of(const std::string& surgery_id) const;
  std::vector<std::string> ids() const;
};

/// Fills progress, rsd_min, elapsed_min and phase_id from the timeline.
void derive_labels(const SurgeryRecord& record, FrameSequence& out);
FrameSequence derive_labels(const SurgeryRecord& record);

/// Deterministic for fixed (spec, n_surgeries, seed); surgery i draws from its
/// own stream derived from the master seed, so generation is parallel across
/// surgeries.
Dataset generate_dataset(const WorkflowSpec& spec, int n_surgeries, std::uint64_t seed);

/// Timeline only (no features), used by generate_dataset.
SurgeryRecord generate_record(const WorkflowSpec& spec, const std::string& surgery_id, std::uint64_t seed);

}  // namespace rsdkit::synthsurg
