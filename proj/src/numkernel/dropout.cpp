#include "rsdkit/numkernel/dropout.hpp"

#include <algorithm>

namespace rsdkit::numkernel {

template <typename Real>
void dropout_inplace(std::span<Real> x, double p, Mode mode, std::mt19937_64& rng, std::span<Real> mask) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0, 1)");
  if (mask.size() != x.size()) throw DimensionError("dropout mask length differs from input length");
  if (mode == Mode::kEval || p == 0.0) {
    std::fill(mask.begin(), mask.end(), Real{1});
    return;
  }
  const Real scale = static_cast<Real>(1.0 / (1.0 - p));
  std::bernoulli_distribution keep(1.0 - p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = keep(rng) ? scale : Real{0};
    x[i] *= mask[i];
  }
}

template <typename Real>
Tensor<Real> dropout(const Tensor<Real>& x, double p, Mode mode, std::mt19937_64& rng, Tensor<Real>* mask) {
  Tensor<Real> out = x;
  Tensor<Real> local(x.shape());
  Tensor<Real>& m = mask ? *mask : local;
  if (m.shape() != x.shape()) m = Tensor<Real>(x.shape());
  dropout_inplace<Real>(out.values(), p, mode, rng, m.values());
  return out;
}

template void dropout_inplace<float>(std::span<float>, double, Mode, std::mt19937_64&, std::span<float>);
template void dropout_inplace<double>(std::span<double>, double, Mode, std::mt19937_64&, std::span<double>);
template Tensor<float> dropout(const Tensor<float>&, double, Mode, std::mt19937_64&, Tensor<float>*);
template Tensor<double> dropout(const Tensor<double>&, double, Mode, std::mt19937_64&, Tensor<double>*);

}  // namespace rsdkit::numkernel
