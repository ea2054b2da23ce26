#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "rsdkit/numkernel/tensor.hpp"

namespace rsdkit::numkernel {

struct SgdConfig {
  double lr0 = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double decay_factor = 10.0;
  std::int64_t decay_every = 20000;

  void validate() const;
  /// Step schedule: lr0 / decay_factor^floor(iteration / decay_every).
  double learning_rate(std::int64_t iteration) const;

  nlohmann::json to_json() const;
  static SgdConfig from_json(const nlohmann::json& j);
};

/// SGD with heavy-ball momentum and coupled L2 weight decay:
///   v <- momentum * v - lr * (g + weight_decay * w);  w <- w + v
template <typename Real>
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdConfig cfg);

  /// Applies one update using each tensor's grad buffer. A non-finite gradient
  /// aborts with NumericError naming the iteration, parameter and norm.
  void step(std::span<const ParamRef<Real>> params, std::int64_t iteration);

  const SgdConfig& config() const noexcept { return cfg_; }

 private:
  SgdConfig cfg_;
  std::vector<std::vector<Real>> velocity_;
};

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// max_norm <= 0 disables clipping. Returns the norm before clipping.
template <typename Real>
double clip_grad_norm(std::span<const ParamRef<Real>> params, double max_norm);

template <typename Real>
void zero_grads(std::span<const ParamRef<Real>> params) {
  for (const auto& p : params) p.tensor->zero_grad();
}

}  // namespace rsdkit::numkernel
