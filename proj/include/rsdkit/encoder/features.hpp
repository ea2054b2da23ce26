#pragma once

// RSDF feature file: container with magic "RSDF"; the header lists every
// surgery (id, frame count, payload offset) and the payload holds each
// surgery's frames x dim f32 feature rows.

#include <filesystem>
#include <string>
#include <vector>

#include "rsdkit/encoder/network.hpp"
#include "rsdkit/synthsurg/dataset.hpp"

namespace rsdkit::encoder {

inline constexpr std::uint16_t kFeatureVersion = 1;

struct FeatureSet {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<float>> features;  // per surgery, n_frames x dim
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t index_of(const std::string& id) const;
  const std::vector<float>& of(const std::string& id) const;
};

/// Frame-wise map through the network's penultimate layer; no state carries
/// between frames.
std::vector<float> extract_features(const EncoderNet<float>& net, const synthsurg::FrameSequence& seq);

/// All surgeries in dataset order, parallel across surgeries.
FeatureSet extract_dataset(const EncoderNet<float>& net, const synthsurg::Dataset& dataset);

void write_features(const std::filesystem::path& path, const FeatureSet& set);
FeatureSet read_features(const std::filesystem::path& path);

}  // namespace rsdkit::encoder
