#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "rsdkit/encoder/task.hpp"
#include "rsdkit/numkernel/checkpoint.hpp"
#include "rsdkit/numkernel/linear.hpp"

namespace rsdkit::encoder {

/// Per-frame MLP: input -> (linear, ReLU) blocks -> task head. The output of
/// the last hidden block is the feature tap.
template <typename Real>
class EncoderNet {
 public:
  using Tensor = numkernel::Tensor<Real>;

  struct Cache {
    std::vector<Tensor> inputs;  // input of every layer, head included
  };

  EncoderNet() = default;
  EncoderNet(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims, EncoderTask task);

  void init(std::mt19937_64& rng);

  const EncoderTask& task() const noexcept { return task_; }
  std::size_t input_dim() const { return hidden_.front().in_features(); }
  std::size_t penultimate_dim() const { return hidden_.back().out_features(); }
  std::vector<std::size_t> hidden_dims() const;

  std::vector<numkernel::ParamRef<Real>> params();

  /// Raw head output [N x output_dim] (logits, or the pre-sigmoid progress).
  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  /// Penultimate activations [N x penultimate_dim].
  Tensor features(const Tensor& x) const;
  /// Accumulates parameter gradients for upstream gradient dout on the head.
  void backward(const Cache& cache, const Tensor& dout);

 private:
  EncoderTask task_;
  std::vector<numkernel::Linear<Real>> hidden_;
  numkernel::Linear<Real> head_;
};

/// Task loss for one frame's raw head output and its gradient w.r.t. that
/// output. Regressions use smooth L1 (through a sigmoid for progress);
/// classifications use softmax cross-entropy.
template <typename Real>
Real task_loss(const EncoderTask& task, const Real* out, const TaskTarget& target, Real* grad);

/// Regression prediction in label units: progress in [0,1] or rsd minutes.
double regression_prediction(const EncoderTask& task, double raw);

numkernel::Checkpoint to_checkpoint(EncoderNet<float>& net, nlohmann::json metadata);
EncoderNet<float> encoder_from_checkpoint(const numkernel::Checkpoint& ckpt);

}  // namespace rsdkit::encoder
