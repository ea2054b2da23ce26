#include "rsdkit/synthsurg/workflow.hpp"

#include <cmath>
#include <string>

#include "rsdkit/common/error.hpp"

namespace rsdkit::synthsurg {

namespace {

constexpr int kToolChannels = 8;

std::vector<PhaseDuration> from_median_minutes(const std::vector<double>& medians, double sigma) {
  std::vector<PhaseDuration> out;
  for (double m : medians) out.push_back({std::log(m * 60.0), sigma});
  return out;
}

std::string phase_str(int m) { return "phase " + std::to_string(m); }

}  // namespace

void WorkflowSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("workflow spec: " + what); };
  if (n_phases < 2) fail("n_phases >= 2 violated");
  if (static_cast<int>(phase_duration.size()) != n_phases) fail("phase_duration must have n_phases entries");
  if (static_cast<int>(skip_probs.size()) != n_phases) fail("skip_probs must have n_phases entries");
  if (static_cast<int>(tool_probs.size()) != n_phases) fail("tool_probs must have n_phases rows");
  for (int m = 0; m < n_phases; ++m) {
    const auto& pd = phase_duration[static_cast<std::size_t>(m)];
    if (!std::isfinite(pd.mu)) fail(phase_str(m) + ": mu must be finite");
    if (!(pd.sigma >= 0.0)) fail(phase_str(m) + ": sigma >= 0 violated");
    const double s = skip_probs[static_cast<std::size_t>(m)];
    if (!(s >= 0.0 && s < 1.0)) fail(phase_str(m) + ": 0 <= skip_prob < 1 violated");
    if (static_cast<int>(tool_probs[static_cast<std::size_t>(m)].size()) != n_tools())
      fail(phase_str(m) + ": tool_probs row length differs");
    for (double p : tool_probs[static_cast<std::size_t>(m)])
      if (!(p >= 0.0 && p <= 1.0)) fail(phase_str(m) + ": tool probability outside [0, 1]");
  }
  if (skip_probs.front() != 0.0) fail("first phase must never be skipped (skip_probs[0] = 0)");
  if (skip_probs.back() != 0.0) fail("final phase must never be skipped (skip_probs[last] = 0)");
  if (end_signal_phase < 0 || end_signal_phase >= n_phases) fail("end_signal_phase outside [0, n_phases)");
  if (feature_dim < n_phases + n_tools() + 1) fail("feature_dim >= n_phases + tool channels + 1 violated");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma >= 0 violated");
  if (!(style_sigma >= 0.0)) fail("style_sigma >= 0 violated");
  if (!(frame_period_s > 0.0)) fail("frame_period_s > 0 violated");
  if (!(time_scale > 0.0)) fail("time_scale > 0 violated");
  if (!(max_duration_min >= 0.0)) fail("max_duration_min >= 0 violated");
}

nlohmann::json WorkflowSpec::to_json() const {
  nlohmann::json pd = nlohmann::json::array();
  for (const auto& p : phase_duration) pd.push_back({{"mu", p.mu}, {"sigma", p.sigma}});
  return {{"name", name},
          {"n_phases", n_phases},
          {"phase_duration", pd},
          {"skip_probs", skip_probs},
          {"tool_probs", tool_probs},
          {"end_signal_phase", end_signal_phase},
          {"feature_dim", feature_dim},
          {"noise_sigma", noise_sigma},
          {"style_sigma", style_sigma},
          {"frame_period_s", frame_period_s},
          {"time_scale", time_scale},
          {"max_duration_min", max_duration_min}};
}

WorkflowSpec WorkflowSpec::from_json(const nlohmann::json& j) {
  WorkflowSpec s;
  s.name = j.at("name").get<std::string>();
  s.n_phases = j.at("n_phases").get<int>();
  for (const auto& p : j.at("phase_duration")) s.phase_duration.push_back({p.at("mu"), p.at("sigma")});
  s.skip_probs = j.at("skip_probs").get<std::vector<double>>();
  s.tool_probs = j.at("tool_probs").get<std::vector<std::vector<double>>>();
  s.end_signal_phase = j.at("end_signal_phase").get<int>();
  s.feature_dim = j.at("feature_dim").get<int>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.style_sigma = j.at("style_sigma").get<double>();
  s.frame_period_s = j.at("frame_period_s").get<double>();
  s.time_scale = j.at("time_scale").get<double>();
  s.max_duration_min = j.at("max_duration_min").get<double>();
  return s;
}

WorkflowSpec cholec_preset() {
  WorkflowSpec s;
  s.name = "cholec";
  s.n_phases = 7;
  // preparation, calot triangle dissection, clipping and cutting, gallbladder
  // dissection, packaging, cleaning and coagulation, gallbladder retraction
  s.phase_duration = from_median_minutes({2.55, 9.1, 4.0, 8.6, 3.5, 4.6, 3.05}, 0.25);
  s.skip_probs = {0.0, 0.0, 0.0, 0.0, 0.0, 0.15, 0.0};
  // grasper, bipolar, hook, scissors, clipper, irrigator, retractor, suction
  s.tool_probs = {
      {0.60, 0.03, 0.30, 0.03, 0.03, 0.03, 0.03, 0.10},
      {0.90, 0.10, 0.80, 0.03, 0.03, 0.03, 0.03, 0.05},
      {0.80, 0.03, 0.10, 0.50, 0.70, 0.03, 0.03, 0.05},
      {0.90, 0.20, 0.80, 0.05, 0.03, 0.05, 0.03, 0.05},
      {0.80, 0.03, 0.03, 0.03, 0.03, 0.10, 0.03, 0.40},
      {0.50, 0.60, 0.03, 0.03, 0.03, 0.70, 0.03, 0.30},
      {0.90, 0.03, 0.03, 0.03, 0.03, 0.10, 0.60, 0.10},
  };
  s.end_signal_phase = 4;  // specimen bag appears while packaging
  s.feature_dim = 32;
  s.noise_sigma = 0.5;
  s.style_sigma = 0.38;
  s.max_duration_min = 100.0;
  return s;
}

WorkflowSpec bypass_preset() {
  WorkflowSpec s;
  s.name = "bypass";
  s.n_phases = 10;
  std::vector<double> medians = {6, 10, 12, 14, 9, 13, 11, 10, 12, 8};
  for (double& m : medians) m *= 112.0 / 105.0;
  s.phase_duration = from_median_minutes(medians, 0.12);
  s.skip_probs = {0.0, 0.0, 0.0, 0.05, 0.0, 0.0, 0.05, 0.0, 0.0, 0.0};
  s.tool_probs.assign(10, std::vector<double>(kToolChannels, 0.05));
  for (int m = 0; m < 10; ++m) {
    auto& row = s.tool_probs[static_cast<std::size_t>(m)];
    row[static_cast<std::size_t>(m % kToolChannels)] = 0.85;
    row[static_cast<std::size_t>((m + 3) % kToolChannels)] = 0.5;
  }
  s.end_signal_phase = 8;
  s.feature_dim = 32;
  s.noise_sigma = 0.5;
  s.style_sigma = 0.25;
  s.max_duration_min = 208.0;
  return s;
}

WorkflowSpec preset(const std::string& name) {
  if (name == "cholec") return cholec_preset();
  if (name == "bypass") return bypass_preset();
  throw ConfigError("unknown preset '" + name + "' (expected cholec or bypass)");
}

double default_s_norm(const std::string& preset_name) {
  if (preset_name == "cholec") return 5.0;
  if (preset_name == "bypass") return 10.0;
  throw ConfigError("no default s_norm for preset '" + preset_name + "'");
}

}  // namespace rsdkit::synthsurg
