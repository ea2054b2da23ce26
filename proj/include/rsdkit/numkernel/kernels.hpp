#pragma once

// Dense matrix kernels. Every kernel has a plain serial version in
// `reference` and an OpenMP version parallel over output rows. Both
// accumulate each output element in the same order, so results agree bit for
// bit regardless of thread count.
//
// All matrices are row-major. Shapes: A is m x k, B is k x n, C is m x n
// unless the suffix says otherwise (t = transposed operand).

#include <cstddef>

namespace rsdkit::numkernel {

namespace reference {

// C (+)= A B
template <typename Real>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Real acc = accumulate ? c[i * n + j] : Real{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

// C += A^T B with A stored k x m.
template <typename Real>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Real acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

// C (+)= A B^T with B stored n x k.
template <typename Real>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Real acc = accumulate ? c[i * n + j] : Real{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
}

}  // namespace reference

inline constexpr std::size_t kParallelWorkThreshold = std::size_t{1} << 16;

template <typename Real>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  const bool par = m > 1 && m * k * n >= kParallelWorkThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    Real* crow = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = Real{0};
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Real>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  const bool par = m > 1 && m * k * n >= kParallelWorkThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    Real* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = a[p * m + i];
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Real>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  const bool par = m > 1 && m * k * n >= kParallelWorkThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Real* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      Real acc = accumulate ? c[i * n + j] : Real{0};
      const Real* brow = b + j * k;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] = acc;
    }
  }
}

// y += alpha * x
template <typename Real>
inline void axpy(std::size_t n, Real alpha, const Real* x, Real* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename Real>
inline Real dot(std::size_t n, const Real* x, const Real* y) {
  Real acc{0};
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace rsdkit::numkernel
