#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rsdkit::numkernel {

template <typename Real>
struct ScalarLoss {
  Real loss;
  Real grad;  // d loss / d pred
};

/// Smooth L1 with the transition at |d| = 1:
///   0.5 d^2 if |d| < 1, |d| - 0.5 otherwise.
template <typename Real>
ScalarLoss<Real> smooth_l1(Real pred, Real target) {
  const Real d = pred - target;
  if (d < Real{1} && d > Real{-1}) return {Real{0.5} * d * d, d};
  return {(d > Real{0} ? d : -d) - Real{0.5}, d > Real{0} ? Real{1} : Real{-1}};
}

template <typename Real>
struct CrossEntropy {
  Real loss;
  std::vector<Real> grad;  // softmax - one_hot
};

/// Softmax cross-entropy over `logits` for the true `cls`; throws IndexError
/// when cls is outside [0, K).
template <typename Real>
CrossEntropy<Real> cross_entropy(std::span<const Real> logits, int cls);

}  // namespace rsdkit::numkernel
