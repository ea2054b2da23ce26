#include "rsdkit/numkernel/checkpoint.hpp"

#include "rsdkit/common/container.hpp"

namespace rsdkit::numkernel {

const Tensor<float>& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.tensor;
  throw CheckpointError("missing tensor '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

namespace {

std::pair<ContainerWriter, Json> build(const Checkpoint& ckpt) {
  ContainerWriter w("RSDC", kCheckpointVersion);
  Json manifest;
  manifest["tensors"] = Json::array();
  for (const auto& nt : ckpt.tensors) {
    const auto offset = w.append_f32(nt.tensor.values());
    manifest["tensors"].push_back({{"name", nt.name},
                                   {"shape", nt.tensor.shape()},
                                   {"dtype", "f32"},
                                   {"offset", offset},
                                   {"nbytes", nt.tensor.size() * sizeof(float)}});
  }
  manifest["metadata"] = ckpt.metadata;
  return {std::move(w), std::move(manifest)};
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  auto [w, manifest] = build(ckpt);
  return w.serialize(manifest);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto [w, manifest] = build(ckpt);
  w.write(path, manifest);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw PipelineOrderError("no checkpoint at " + path.string() + "; train it first");
  ContainerReader r(path, "RSDC");
  if (r.header().version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported version " + std::to_string(r.header().version));
  }
  const Json& manifest = r.header().header;
  Checkpoint ckpt;
  ckpt.metadata = manifest.value("metadata", Json::object());
  for (const auto& e : manifest.at("tensors")) {
    if (e.at("dtype") != "f32") throw CheckpointError("unsupported dtype " + e.at("dtype").dump());
    auto shape = e.at("shape").get<std::vector<std::size_t>>();
    Tensor<float> t(shape);
    auto vals = r.read_f32(e.at("offset").get<std::uint64_t>(), t.size());
    std::copy(vals.begin(), vals.end(), t.data());
    ckpt.tensors.push_back({e.at("name").get<std::string>(), std::move(t)});
  }
  return ckpt;
}

}  // namespace rsdkit::numkernel
