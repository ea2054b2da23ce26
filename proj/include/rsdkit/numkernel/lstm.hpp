#pragma once

// Single-layer LSTM without peepholes. Gate order in the 4H blocks is
// (input, forget, cell candidate, output):
//
//   a = x W_in + h_prev W_hid + b
//   i = sigma(a_i), f = sigma(a_f), g = tanh(a_g), o = sigma(a_o)
//   c = f * c_prev + i * g,  h = o * tanh(c)
//
// Weights are stored input-major: W_in is [D x 4H] and W_hid is [H x 4H], so
// a row vector times the matrix gives the pre-activations.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "rsdkit/numkernel/tensor.hpp"

namespace rsdkit::numkernel {

template <typename Real>
struct LstmCellParams {
  Tensor<Real> w_input;   // [D, 4H]
  Tensor<Real> w_hidden;  // [H, 4H]
  Tensor<Real> bias;      // [4H]

  LstmCellParams() = default;
  LstmCellParams(std::size_t input_size, std::size_t hidden_size);

  std::size_t input_size() const { return w_input.dim(0); }
  std::size_t hidden_size() const { return w_hidden.dim(0); }

  /// uniform(-k, k) with k = 1/sqrt(fan_in) for both matrices and the bias;
  /// the forget-gate bias block is then set to forget_bias.
  void init(std::mt19937_64& rng, Real forget_bias = Real{1});
  void validate() const;
};

template <typename Real>
struct LstmStepCache {
  std::vector<Real> x, h_prev, c_prev;
  std::vector<Real> gates;  // activated i, f, g, o
  std::vector<Real> c, tanh_c;
};

template <typename Real>
struct LstmStepResult {
  std::vector<Real> h, c;
  LstmStepCache<Real> cache;
};

template <typename Real>
struct LstmStepGrads {
  std::vector<Real> dx, dh_prev, dc_prev;
};

template <typename Real>
LstmStepResult<Real> lstm_cell_step(const LstmCellParams<Real>& params, std::span<const Real> x,
                                    std::span<const Real> h_prev, std::span<const Real> c_prev);

/// Backward through one step given dL/dh_t and dL/dc_t (the latter from the
/// following step). Parameter gradients are accumulated into the params.
template <typename Real>
LstmStepGrads<Real> lstm_cell_backward(LstmCellParams<Real>& params, const LstmStepCache<Real>& cache,
                                       std::span<const Real> dh, std::span<const Real> dc);

/// Per-step state of a full left-to-right pass starting from h_0 = c_0 = 0.
template <typename Real>
struct LstmSequenceCache {
  std::size_t steps = 0;
  std::size_t hidden = 0;
  std::vector<Real> gates;   // steps x 4H
  std::vector<Real> c;       // steps x H
  std::vector<Real> tanh_c;  // steps x H
  std::vector<Real> h;       // steps x H
};

/// x is steps x D, row-major.
template <typename Real>
void lstm_forward_sequence(const LstmCellParams<Real>& params, const Real* x, std::size_t steps,
                           LstmSequenceCache<Real>& cache);

/// Full backpropagation through time. dh holds dL/dh_t for every step
/// (steps x H). Accumulates parameter gradients; writes dL/dx to dx when it is
/// non-null.
template <typename Real>
void lstm_backward_sequence(LstmCellParams<Real>& params, const Real* x, std::size_t steps,
                            const LstmSequenceCache<Real>& cache, const Real* dh, Real* dx);

}  // namespace rsdkit::numkernel
