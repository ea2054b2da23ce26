#include "rsdkit/numkernel/linear.hpp"

#include <cmath>

#include "rsdkit/numkernel/kernels.hpp"

namespace rsdkit::numkernel {

namespace {

template <typename Real>
void check_linear_shapes(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(0) || b.dim(0) != w.dim(1)) {
    throw DimensionError("linear: x " + shape_string(x.shape()) + ", W " + shape_string(w.shape()) + ", b " +
                         shape_string(b.shape()));
  }
}

}  // namespace

template <typename Real>
Tensor<Real> linear_forward(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b) {
  check_linear_shapes(x, w, b);
  const std::size_t n = x.dim(0), d = x.dim(1), m = w.dim(1);
  Tensor<Real> y({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) y(i, j) = b[j];
  gemm_nn(n, d, m, x.data(), w.data(), y.data(), true);
  return y;
}

template <typename Real>
Tensor<Real> linear_backward(const Tensor<Real>& x, Tensor<Real>& w, Tensor<Real>& b, const Tensor<Real>& dy) {
  check_linear_shapes(x, w, b);
  const std::size_t n = x.dim(0), d = x.dim(1), m = w.dim(1);
  require_shape(dy, {n, m}, "linear: upstream gradient");
  if (!w.has_grad()) w.enable_grad();
  if (!b.has_grad()) b.enable_grad();
  gemm_tn(d, n, m, x.data(), dy.data(), w.grad().data());
  auto bg = b.grad();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) bg[j] += dy(i, j);
  Tensor<Real> dx({n, d});
  gemm_nt(n, m, d, dy.data(), w.data(), dx.data(), false);
  return dx;
}

template <typename Real>
void init_uniform(Tensor<Real>& t, double k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-k, k);
  for (auto& v : t.values()) v = static_cast<Real>(dist(rng));
}

template <typename Real>
void Linear<Real>::init_uniform(std::mt19937_64& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in_features()));
  numkernel::init_uniform(weight, k, rng);
  numkernel::init_uniform(bias, k, rng);
}

template Tensor<float> linear_forward(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> linear_forward(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);
template Tensor<float> linear_backward(const Tensor<float>&, Tensor<float>&, Tensor<float>&, const Tensor<float>&);
template Tensor<double> linear_backward(const Tensor<double>&, Tensor<double>&, Tensor<double>&,
                                        const Tensor<double>&);
template void init_uniform(Tensor<float>&, double, std::mt19937_64&);
template void init_uniform(Tensor<double>&, double, std::mt19937_64&);
template struct Linear<float>;
template struct Linear<double>;

}  // namespace rsdkit::numkernel
