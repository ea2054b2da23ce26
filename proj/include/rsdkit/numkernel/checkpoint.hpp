#pragma once

// RSDC checkpoint: container with magic "RSDC" whose JSON manifest lists
// tensors (name, shape, dtype, offset, nbytes) and training metadata; the
// payload holds the raw little-endian f32 blobs in manifest order.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsdkit/numkernel/tensor.hpp"

namespace rsdkit::numkernel {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor<float>& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Captures the current values of a parameter list, converting to f32.
template <typename Real>
std::vector<NamedTensor> snapshot(const std::vector<ParamRef<Real>>& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, p.tensor->template cast<float>()});
  return out;
}

/// Copies checkpoint tensors into a parameter list by name; shapes must match.
template <typename Real>
void restore(const Checkpoint& ckpt, const std::vector<ParamRef<Real>>& params) {
  for (const auto& p : params) {
    const auto& src = ckpt.get(p.name);
    if (src.shape() != p.tensor->shape()) {
      throw CheckpointError("tensor '" + p.name + "' has shape " + shape_string(src.shape()) + ", model expects " +
                            shape_string(p.tensor->shape()));
    }
    auto dst = p.tensor->values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(src[i]);
  }
}

}  // namespace rsdkit::numkernel
