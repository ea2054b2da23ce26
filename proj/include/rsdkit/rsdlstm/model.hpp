#pragma once

// Stage-2 sequence model. Per frame:
//   x_t -> dropout -> LSTM -> dropout -> [h_t ; elapsed_min_t] -> two heads
// The rsd head is a single linear unit regressing rsd / s_norm; the progress
// head is a single linear unit followed by a sigmoid.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rsdkit/numkernel/checkpoint.hpp"
#include "rsdkit/numkernel/dropout.hpp"
#include "rsdkit/numkernel/linear.hpp"
#include "rsdkit/numkernel/lstm.hpp"

namespace rsdkit::rsdlstm {

enum class VariantKind { kRsdNet, kSingleTask, kTimeLstm };

std::string variant_name(VariantKind kind);   // "rsdnet", "single", "timelstm"
VariantKind parse_variant(const std::string& name);
/// Only the multi-task variant trains and reports the progress head.
inline bool has_progress_head(VariantKind kind) { return kind == VariantKind::kRsdNet; }

double normalize_rsd(double rsd_min, double s_norm);
/// Inverse of normalize_rsd, without clamping.
double denormalize_rsd(double output, double s_norm);
/// max(0, denormalize_rsd(output, s_norm)): the reported prediction.
double rsd_prediction(double output, double s_norm);

template <typename Real>
struct RsdNet {
  VariantKind kind = VariantKind::kRsdNet;
  numkernel::LstmCellParams<Real> lstm;
  numkernel::Linear<Real> head_rsd;   // [H + 1 -> 1]
  numkernel::Linear<Real> head_prog;  // [H + 1 -> 1], sigmoid applied after
  double s_norm = 5.0;
  double dropout_p = 0.3;

  RsdNet() = default;
  RsdNet(VariantKind kind, std::size_t input_dim, std::size_t hidden, double s_norm, double dropout_p);

  std::size_t input_dim() const { return lstm.input_size(); }
  std::size_t hidden() const { return lstm.hidden_size(); }

  void init(std::mt19937_64& rng);
  /// Trainable parameters; the progress head is included only for variants
  /// that use it.
  std::vector<numkernel::ParamRef<Real>> params();
  /// Every tensor, for checkpoints.
  std::vector<numkernel::ParamRef<Real>> all_tensors();
};

/// Everything the backward pass needs from one forward pass.
template <typename Real>
struct SequenceCache {
  std::size_t steps = 0;
  std::vector<Real> x_mask;  // steps x D dropout multipliers
  std::vector<Real> x;       // steps x D dropped-out inputs
  numkernel::LstmSequenceCache<Real> lstm;
  std::vector<Real> h_mask;  // steps x H
  numkernel::Tensor<Real> z; // steps x (H + 1): dropped-out h plus elapsed
};

template <typename Real>
struct SequenceOutput {
  std::vector<Real> rsd_raw;   // normalized rsd head output
  std::vector<Real> prog;      // sigmoid of the progress head
  std::vector<Real> prog_raw;
};

/// One causal left-to-right pass from zero state. `rng` drives dropout in
/// train mode and is unused in eval mode.
template <typename Real>
SequenceOutput<Real> forward_sequence(const RsdNet<Real>& net, std::span<const Real> features,
                                      std::span<const Real> elapsed_min, numkernel::Mode mode, std::mt19937_64& rng,
                                      SequenceCache<Real>* cache = nullptr);

struct LossParts {
  double rsd = 0.0;   // mean smooth L1 on rsd / s_norm
  double prog = 0.0;  // mean smooth L1 on progress (0 for single-task variants)
  double total() const { return rsd + prog; }
};

/// Per-frame mean of smooth L1 on both heads with equal weights; fills the
/// head-output gradients d_rsd_raw and d_prog_raw (per frame).
template <typename Real>
LossParts loss_multitask(const RsdNet<Real>& net, const SequenceOutput<Real>& out, std::span<const double> rsd_true,
                         std::span<const double> prog_true, std::vector<Real>* d_rsd_raw,
                         std::vector<Real>* d_prog_raw);

/// Accumulates parameter gradients. Returns dL/dfeatures when `dx` is given.
template <typename Real>
void backward_sequence(RsdNet<Real>& net, const SequenceCache<Real>& cache, std::span<const Real> d_rsd_raw,
                       std::span<const Real> d_prog_raw, std::vector<Real>* dx = nullptr);

numkernel::Checkpoint to_checkpoint(RsdNet<float>& net, nlohmann::json metadata);
RsdNet<float> rsdnet_from_checkpoint(const numkernel::Checkpoint& ckpt);

}  // namespace rsdkit::rsdlstm
