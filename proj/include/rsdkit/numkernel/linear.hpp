#pragma once

#include <cstddef>
#include <random>

#include "rsdkit/numkernel/tensor.hpp"

namespace rsdkit::numkernel {

/// y = x W + b for x [N x D], W [D x M], b [M].
template <typename Real>
Tensor<Real> linear_forward(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b);

/// Accumulates dW = x^T dy and db = sum_rows(dy) into w.grad() / b.grad();
/// returns dx = dy W^T.
template <typename Real>
Tensor<Real> linear_backward(const Tensor<Real>& x, Tensor<Real>& w, Tensor<Real>& b, const Tensor<Real>& dy);

template <typename Real>
struct Linear {
  Tensor<Real> weight;  // [in, out]
  Tensor<Real> bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out) : weight({in, out}), bias({out}) {
    weight.enable_grad();
    bias.enable_grad();
  }
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  /// uniform(-k, k), k = 1/sqrt(fan_in), for weights and bias.
  void init_uniform(std::mt19937_64& rng);

  Tensor<Real> forward(const Tensor<Real>& x) const { return linear_forward(x, weight, bias); }
  Tensor<Real> backward(const Tensor<Real>& x, const Tensor<Real>& dy) {
    return linear_backward(x, weight, bias, dy);
  }
};

template <typename Real>
void init_uniform(Tensor<Real>& t, double k, std::mt19937_64& rng);

}  // namespace rsdkit::numkernel
