#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace rsdkit::synthsurg {

/// Log-normal phase duration: exp(N(mu, sigma)) seconds at real time scale.
struct PhaseDuration {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Generator parameters for one surgery type.
///
/// Per-frame features are laid out as
///   [0, n_phases)                      phase one-hot
///   [n_phases, n_phases + n_tools)     binary tool-presence channels
///   n_phases + n_tools                 terminal cue (on only in end_signal_phase)
///   the rest up to feature_dim         pure noise
/// with N(0, noise_sigma) added to every dimension except the cue.
struct WorkflowSpec {
  std::string name = "custom";
  int n_phases = 7;
  std::vector<PhaseDuration> phase_duration;
  std::vector<double> skip_probs;                // first and last must be 0
  std::vector<std::vector<double>> tool_probs;   // [n_phases][n_tools]
  int end_signal_phase = 0;
  int feature_dim = 32;
  double noise_sigma = 0.0;
  double style_sigma = 0.0;                      // per-surgery log-duration multiplier spread
  double frame_period_s = 1.0;                   // wall seconds per frame
  double time_scale = 1.0;                       // divides all durations; labels stay in simulated time
  double max_duration_min = 0.0;                 // surgeries longer than this are redrawn; 0 disables

  int n_tools() const { return tool_probs.empty() ? 0 : static_cast<int>(tool_probs.front().size()); }
  int cue_channel() const { return n_phases + n_tools(); }
  /// Simulated seconds represented by one frame.
  double seconds_per_frame() const { return frame_period_s / time_scale; }

  /// Throws ConfigError naming the violated invariant.
  void validate() const;

  nlohmann::json to_json() const;
  static WorkflowSpec from_json(const nlohmann::json& j);
};

/// Seven-phase cholecystectomy-like workflow, ~38 min mean duration.
WorkflowSpec cholec_preset();
/// Ten-phase gastric-bypass-like workflow, ~115 min mean duration.
WorkflowSpec bypass_preset();
/// "cholec" or "bypass"; throws ConfigError otherwise.
WorkflowSpec preset(const std::string& name);

/// s_norm used for RSD targets of each preset (5 and 10 minutes).
double default_s_norm(const std::string& preset_name);

}  // namespace rsdkit::synthsurg
