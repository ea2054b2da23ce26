#pragma once

#include <cmath>

namespace rsdkit::numkernel {

template <typename Real>
inline Real sigmoid(Real x) {
  if (x >= Real{0}) {
    const Real z = std::exp(-x);
    return Real{1} / (Real{1} + z);
  }
  const Real z = std::exp(x);
  return z / (Real{1} + z);
}

template <typename Real>
inline Real relu(Real x) {
  return x > Real{0} ? x : Real{0};
}

}  // namespace rsdkit::numkernel
