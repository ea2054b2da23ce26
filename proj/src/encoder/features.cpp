#include "rsdkit/encoder/features.hpp"

#include <algorithm>

#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"

namespace rsdkit::encoder {

std::size_t FeatureSet::index_of(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end())
    throw PipelineOrderError("no features for surgery '" + id + "'; run `encoder extract` on this dataset first");
  return static_cast<std::size_t>(it - ids.begin());
}

const std::vector<float>& FeatureSet::of(const std::string& id) const { return features[index_of(id)]; }

std::vector<float> extract_features(const EncoderNet<float>& net, const synthsurg::FrameSequence& seq) {
  if (static_cast<std::size_t>(seq.feature_dim) != net.input_dim())
    throw CheckpointError("encoder expects " + std::to_string(net.input_dim()) + " input dims, sequence has " +
                          std::to_string(seq.feature_dim));
  const auto n = static_cast<std::size_t>(seq.n_frames);
  numkernel::Tensor<float> x({n, net.input_dim()});
  std::copy(seq.features.begin(), seq.features.end(), x.data());
  const auto f = net.features(x);
  return {f.data(), f.data() + f.size()};
}

FeatureSet extract_dataset(const EncoderNet<float>& net, const synthsurg::Dataset& dataset) {
  FeatureSet set;
  set.dim = net.penultimate_dim();
  set.ids = dataset.ids();
  set.features.resize(dataset.surgeries.size());
  const auto n = static_cast<std::ptrdiff_t>(dataset.surgeries.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    set.features[static_cast<std::size_t>(i)] = extract_features(net, dataset.surgeries[static_cast<std::size_t>(i)].frames);
  return set;
}

void write_features(const std::filesystem::path& path, const FeatureSet& set) {
  ContainerWriter w("RSDF", kFeatureVersion);
  Json index = Json::array();
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    const auto off = w.append_f32(set.features[i]);
    index.push_back({{"surgery_id", set.ids[i]}, {"n_frames", set.features[i].size() / set.dim}, {"offset", off}});
  }
  Json header = set.metadata;
  header["dim"] = set.dim;
  header["surgeries"] = std::move(index);
  w.write(path, header);
}

FeatureSet read_features(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw PipelineOrderError("no feature file at " + path.string() + "; run `encoder extract` first");
  ContainerReader r(path, "RSDF");
  Json header = r.header().header;
  FeatureSet set;
  set.dim = header.at("dim").get<std::size_t>();
  for (const auto& e : header.at("surgeries")) {
    set.ids.push_back(e.at("surgery_id").get<std::string>());
    set.features.push_back(r.read_f32(e.at("offset").get<std::uint64_t>(), e.at("n_frames").get<std::uint64_t>() * set.dim));
  }
  header.erase("surgeries");
  header.erase("dim");
  set.metadata = std::move(header);
  return set;
}

}  // namespace rsdkit::encoder
