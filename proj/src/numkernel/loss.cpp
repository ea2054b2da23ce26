#include "rsdkit/numkernel/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsdkit/common/error.hpp"

namespace rsdkit::numkernel {

template <typename Real>
CrossEntropy<Real> cross_entropy(std::span<const Real> logits, int cls) {
  const auto k = static_cast<int>(logits.size());
  if (cls < 0 || cls >= k) {
    throw IndexError("class " + std::to_string(cls) + " outside [0, " + std::to_string(k) + ")");
  }
  const Real mx = *std::max_element(logits.begin(), logits.end());
  CrossEntropy<Real> out{Real{0}, std::vector<Real>(logits.size())};
  Real sum{0};
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out.grad[j] = std::exp(logits[j] - mx);
    sum += out.grad[j];
  }
  for (auto& g : out.grad) g /= sum;
  out.loss = std::log(sum) - (logits[static_cast<std::size_t>(cls)] - mx);
  out.grad[static_cast<std::size_t>(cls)] -= Real{1};
  return out;
}

template CrossEntropy<float> cross_entropy(std::span<const float>, int);
template CrossEntropy<double> cross_entropy(std::span<const double>, int);

}  // namespace rsdkit::numkernel
