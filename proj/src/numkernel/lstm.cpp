#include "rsdkit/numkernel/lstm.hpp"

#include <cmath>

#include "rsdkit/numkernel/activations.hpp"
#include "rsdkit/numkernel/kernels.hpp"
#include "rsdkit/numkernel/linear.hpp"

namespace rsdkit::numkernel {

template <typename Real>
LstmCellParams<Real>::LstmCellParams(std::size_t input_size, std::size_t hidden_size)
    : w_input({input_size, 4 * hidden_size}), w_hidden({hidden_size, 4 * hidden_size}), bias({4 * hidden_size}) {
  if (hidden_size == 0) throw DimensionError("lstm: hidden size must be positive");
  w_input.enable_grad();
  w_hidden.enable_grad();
  bias.enable_grad();
}

template <typename Real>
void LstmCellParams<Real>::init(std::mt19937_64& rng, Real forget_bias) {
  const std::size_t h = hidden_size();
  init_uniform(w_input, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(input_size(), 1))), rng);
  init_uniform(w_hidden, 1.0 / std::sqrt(static_cast<double>(h)), rng);
  init_uniform(bias, 1.0 / std::sqrt(static_cast<double>(h)), rng);
  for (std::size_t j = h; j < 2 * h; ++j) bias[j] = forget_bias;
}

template <typename Real>
void LstmCellParams<Real>::validate() const {
  const std::size_t h = w_hidden.dim(0);
  require_shape(w_hidden, {h, 4 * h}, "lstm: W_hid");
  require_shape(w_input, {w_input.dim(0), 4 * h}, "lstm: W_in");
  require_shape(bias, {4 * h}, "lstm: bias");
  for (const auto* t : {&w_input, &w_hidden, &bias})
    for (Real v : t->values())
      if (!std::isfinite(v)) throw NumericError("lstm: non-finite parameter value");
}

namespace {

// Turns pre-activations into activated gates, then c and h.
template <typename Real>
void lstm_pointwise(std::size_t h, Real* gates, const Real* c_prev, Real* c, Real* tanh_c, Real* hout) {
  Real* ig = gates;
  Real* fg = gates + h;
  Real* gg = gates + 2 * h;
  Real* og = gates + 3 * h;
  for (std::size_t j = 0; j < h; ++j) {
    ig[j] = sigmoid(ig[j]);
    fg[j] = sigmoid(fg[j]);
    gg[j] = std::tanh(gg[j]);
    og[j] = sigmoid(og[j]);
    c[j] = fg[j] * (c_prev ? c_prev[j] : Real{0}) + ig[j] * gg[j];
    tanh_c[j] = std::tanh(c[j]);
    hout[j] = og[j] * tanh_c[j];
  }
}

// Gate pre-activation gradients from dL/dh, dL/dc (already including the
// o * (1 - tanh^2) path) for one step. Writes da and dc_prev.
template <typename Real>
void lstm_gate_grads(std::size_t h, const Real* gates, const Real* c_prev, const Real* tanh_c, const Real* dh,
                     const Real* dc_in, Real* da, Real* dc_prev) {
  const Real* ig = gates;
  const Real* fg = gates + h;
  const Real* gg = gates + 2 * h;
  const Real* og = gates + 3 * h;
  for (std::size_t j = 0; j < h; ++j) {
    const Real dc = dh[j] * og[j] * (Real{1} - tanh_c[j] * tanh_c[j]) + dc_in[j];
    const Real cp = c_prev ? c_prev[j] : Real{0};
    da[j] = dc * gg[j] * ig[j] * (Real{1} - ig[j]);
    da[h + j] = dc * cp * fg[j] * (Real{1} - fg[j]);
    da[2 * h + j] = dc * ig[j] * (Real{1} - gg[j] * gg[j]);
    da[3 * h + j] = dh[j] * tanh_c[j] * og[j] * (Real{1} - og[j]);
    dc_prev[j] = dc * fg[j];
  }
}

}  // namespace

template <typename Real>
LstmStepResult<Real> lstm_cell_step(const LstmCellParams<Real>& params, std::span<const Real> x,
                                    std::span<const Real> h_prev, std::span<const Real> c_prev) {
  const std::size_t d = params.input_size(), h = params.hidden_size();
  if (x.size() != d || h_prev.size() != h || c_prev.size() != h) {
    throw DimensionError("lstm step: x " + std::to_string(x.size()) + " (want " + std::to_string(d) + "), h " +
                         std::to_string(h_prev.size()) + ", c " + std::to_string(c_prev.size()) + " (want " +
                         std::to_string(h) + ")");
  }
  LstmStepResult<Real> r;
  auto& cache = r.cache;
  cache.x.assign(x.begin(), x.end());
  cache.h_prev.assign(h_prev.begin(), h_prev.end());
  cache.c_prev.assign(c_prev.begin(), c_prev.end());
  cache.gates.assign(params.bias.values().begin(), params.bias.values().end());
  for (std::size_t k = 0; k < d; ++k) axpy(4 * h, x[k], params.w_input.data() + k * 4 * h, cache.gates.data());
  for (std::size_t k = 0; k < h; ++k)
    axpy(4 * h, h_prev[k], params.w_hidden.data() + k * 4 * h, cache.gates.data());
  cache.c.resize(h);
  cache.tanh_c.resize(h);
  r.h.resize(h);
  lstm_pointwise(h, cache.gates.data(), cache.c_prev.data(), cache.c.data(), cache.tanh_c.data(), r.h.data());
  r.c = cache.c;
  return r;
}

template <typename Real>
LstmStepGrads<Real> lstm_cell_backward(LstmCellParams<Real>& params, const LstmStepCache<Real>& cache,
                                       std::span<const Real> dh, std::span<const Real> dc) {
  const std::size_t d = params.input_size(), h = params.hidden_size();
  if (dh.size() != h || dc.size() != h) throw DimensionError("lstm step backward: gradient length mismatch");
  std::vector<Real> da(4 * h);
  LstmStepGrads<Real> g;
  g.dc_prev.resize(h);
  lstm_gate_grads(h, cache.gates.data(), cache.c_prev.data(), cache.tanh_c.data(), dh.data(), dc.data(),
                  da.data(), g.dc_prev.data());
  auto gw_in = params.w_input.grad();
  auto gw_hid = params.w_hidden.grad();
  auto gb = params.bias.grad();
  for (std::size_t k = 0; k < d; ++k) axpy(4 * h, cache.x[k], da.data(), gw_in.data() + k * 4 * h);
  for (std::size_t k = 0; k < h; ++k) axpy(4 * h, cache.h_prev[k], da.data(), gw_hid.data() + k * 4 * h);
  for (std::size_t j = 0; j < 4 * h; ++j) gb[j] += da[j];
  g.dx.resize(d);
  for (std::size_t k = 0; k < d; ++k) g.dx[k] = dot(4 * h, params.w_input.data() + k * 4 * h, da.data());
  g.dh_prev.resize(h);
  for (std::size_t k = 0; k < h; ++k) g.dh_prev[k] = dot(4 * h, params.w_hidden.data() + k * 4 * h, da.data());
  return g;
}

template <typename Real>
void lstm_forward_sequence(const LstmCellParams<Real>& params, const Real* x, std::size_t steps,
                           LstmSequenceCache<Real>& cache) {
  const std::size_t d = params.input_size(), h = params.hidden_size(), g4 = 4 * h;
  cache.steps = steps;
  cache.hidden = h;
  cache.gates.resize(steps * g4);
  cache.c.resize(steps * h);
  cache.tanh_c.resize(steps * h);
  cache.h.resize(steps * h);
  // Input projection for all steps at once, then the recurrence.
  for (std::size_t t = 0; t < steps; ++t)
    std::copy(params.bias.data(), params.bias.data() + g4, cache.gates.data() + t * g4);
  gemm_nn(steps, d, g4, x, params.w_input.data(), cache.gates.data(), true);
  for (std::size_t t = 0; t < steps; ++t) {
    Real* a = cache.gates.data() + t * g4;
    const Real* hp = t ? cache.h.data() + (t - 1) * h : nullptr;
    const Real* cp = t ? cache.c.data() + (t - 1) * h : nullptr;
    if (hp)
      for (std::size_t k = 0; k < h; ++k) axpy(g4, hp[k], params.w_hidden.data() + k * g4, a);
    lstm_pointwise(h, a, cp, cache.c.data() + t * h, cache.tanh_c.data() + t * h, cache.h.data() + t * h);
  }
}

template <typename Real>
void lstm_backward_sequence(LstmCellParams<Real>& params, const Real* x, std::size_t steps,
                            const LstmSequenceCache<Real>& cache, const Real* dh, Real* dx) {
  const std::size_t d = params.input_size(), h = params.hidden_size(), g4 = 4 * h;
  if (cache.steps != steps || cache.hidden != h) throw DimensionError("lstm backward: cache does not match input");
  std::vector<Real> da_all(steps * g4);
  std::vector<Real> dh_next(h, Real{0}), dc_next(h, Real{0}), dh_total(h), dc_prev(h);
  auto gw_hid = params.w_hidden.grad();
  for (std::size_t tt = steps; tt-- > 0;) {
    const Real* cp = tt ? cache.c.data() + (tt - 1) * h : nullptr;
    const Real* hp = tt ? cache.h.data() + (tt - 1) * h : nullptr;
    for (std::size_t j = 0; j < h; ++j) dh_total[j] = dh[tt * h + j] + dh_next[j];
    Real* da = da_all.data() + tt * g4;
    lstm_gate_grads(h, cache.gates.data() + tt * g4, cp, cache.tanh_c.data() + tt * h, dh_total.data(),
                    dc_next.data(), da, dc_prev.data());
    dc_next.swap(dc_prev);
    if (hp) {
      for (std::size_t k = 0; k < h; ++k) {
        axpy(g4, hp[k], da, gw_hid.data() + k * g4);
        dh_next[k] = dot(g4, params.w_hidden.data() + k * g4, da);
      }
    }
  }
  gemm_tn(d, steps, g4, x, da_all.data(), params.w_input.grad().data());
  auto gb = params.bias.grad();
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < g4; ++j) gb[j] += da_all[t * g4 + j];
  if (dx) gemm_nt(steps, g4, d, da_all.data(), params.w_input.data(), dx, false);
}

template struct LstmCellParams<float>;
template struct LstmCellParams<double>;
template LstmStepResult<float> lstm_cell_step(const LstmCellParams<float>&, std::span<const float>,
                                              std::span<const float>, std::span<const float>);
template LstmStepResult<double> lstm_cell_step(const LstmCellParams<double>&, std::span<const double>,
                                               std::span<const double>, std::span<const double>);
template LstmStepGrads<float> lstm_cell_backward(LstmCellParams<float>&, const LstmStepCache<float>&,
                                                 std::span<const float>, std::span<const float>);
template LstmStepGrads<double> lstm_cell_backward(LstmCellParams<double>&, const LstmStepCache<double>&,
                                                  std::span<const double>, std::span<const double>);
template void lstm_forward_sequence(const LstmCellParams<float>&, const float*, std::size_t,
                                    LstmSequenceCache<float>&);
template void lstm_forward_sequence(const LstmCellParams<double>&, const double*, std::size_t,
                                    LstmSequenceCache<double>&);
template void lstm_backward_sequence(LstmCellParams<float>&, const float*, std::size_t,
                                     const LstmSequenceCache<float>&, const float*, float*);
template void lstm_backward_sequence(LstmCellParams<double>&, const double*, std::size_t,
                                     const LstmSequenceCache<double>&, const double*, double*);

}  // namespace rsdkit::numkernel
