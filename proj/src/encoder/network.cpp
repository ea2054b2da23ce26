#include "rsdkit/encoder/network.hpp"

#include <algorithm>
#include <cmath>

#include "rsdkit/numkernel/activations.hpp"
#include "rsdkit/numkernel/loss.hpp"

namespace rsdkit::encoder {

using numkernel::ParamRef;

template <typename Real>
EncoderNet<Real>::EncoderNet(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims, EncoderTask task)
    : task_(task) {
  task_.validate();
  if (hidden_dims.empty()) throw ConfigError("encoder needs at least one hidden layer (the feature tap)");
  std::size_t in = input_dim;
  for (auto h : hidden_dims) {
    hidden_.emplace_back(in, h);
    in = h;
  }
  head_ = numkernel::Linear<Real>(in, static_cast<std::size_t>(task_.output_dim()));
}

template <typename Real>
void EncoderNet<Real>::init(std::mt19937_64& rng) {
  for (auto& l : hidden_) l.init_uniform(rng);
  head_.init_uniform(rng);
}

template <typename Real>
std::vector<std::size_t> EncoderNet<Real>::hidden_dims() const {
  std::vector<std::size_t> out;
  for (const auto& l : hidden_) out.push_back(l.out_features());
  return out;
}

template <typename Real>
std::vector<ParamRef<Real>> EncoderNet<Real>::params() {
  std::vector<ParamRef<Real>> out;
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    out.push_back({"hidden" + std::to_string(i) + ".weight", &hidden_[i].weight});
    out.push_back({"hidden" + std::to_string(i) + ".bias", &hidden_[i].bias});
  }
  out.push_back({"head.weight", &head_.weight});
  out.push_back({"head.bias", &head_.bias});
  return out;
}

template <typename Real>
typename EncoderNet<Real>::Tensor EncoderNet<Real>::forward(const Tensor& x, Cache* cache) const {
  if (cache) cache->inputs.clear();
  Tensor h = x;
  for (const auto& l : hidden_) {
    if (cache) cache->inputs.push_back(h);
    h = l.forward(h);
    for (auto& v : h.values()) v = numkernel::relu(v);
  }
  if (cache) cache->inputs.push_back(h);
  return head_.forward(h);
}

template <typename Real>
typename EncoderNet<Real>::Tensor EncoderNet<Real>::features(const Tensor& x) const {
  Tensor h = x;
  for (const auto& l : hidden_) {
    h = l.forward(h);
    for (auto& v : h.values()) v = numkernel::relu(v);
  }
  return h;
}

template <typename Real>
void EncoderNet<Real>::backward(const Cache& cache, const Tensor& dout) {
  Tensor d = head_.backward(cache.inputs.back(), dout);
  for (std::size_t i = hidden_.size(); i-- > 0;) {
    // cache.inputs[i + 1] is the ReLU output of layer i.
    const auto& act = cache.inputs[i + 1];
    for (std::size_t k = 0; k < d.size(); ++k)
      if (!(act[k] > Real{0})) d[k] = Real{0};
    d = hidden_[i].backward(cache.inputs[i], d);
  }
}

template <typename Real>
Real task_loss(const EncoderTask& task, const Real* out, const TaskTarget& target, Real* grad) {
  if (task.is_classification()) {
    const auto ce = numkernel::cross_entropy<Real>(
        std::span<const Real>(out, static_cast<std::size_t>(task.output_dim())), target.cls);
    std::copy(ce.grad.begin(), ce.grad.end(), grad);
    return ce.loss;
  }
  if (task.kind == TaskKind::kProgressRegression) {
    const Real p = numkernel::sigmoid(out[0]);
    const auto l = numkernel::smooth_l1(p, static_cast<Real>(target.value));
    grad[0] = l.grad * p * (Real{1} - p);
    return l.loss;
  }
  const auto l = numkernel::smooth_l1(out[0], static_cast<Real>(target.value));
  grad[0] = l.grad;
  return l.loss;
}

double regression_prediction(const EncoderTask& task, double raw) {
  if (task.kind == TaskKind::kProgressRegression) return numkernel::sigmoid(raw);
  if (task.kind == TaskKind::kRsdRegression) return std::max(0.0, raw * task.s_norm);
  throw ConfigError("regression_prediction on a classification task");
}

numkernel::Checkpoint to_checkpoint(EncoderNet<float>& net, nlohmann::json metadata) {
  numkernel::Checkpoint ckpt;
  metadata["kind"] = "encoder";
  metadata["task"] = net.task().to_json();
  metadata["input_dim"] = net.input_dim();
  metadata["hidden_dims"] = net.hidden_dims();
  ckpt.metadata = std::move(metadata);
  ckpt.tensors = numkernel::snapshot(net.params());
  return ckpt;
}

EncoderNet<float> encoder_from_checkpoint(const numkernel::Checkpoint& ckpt) {
  if (ckpt.metadata.value("kind", "") != "encoder") throw CheckpointError("not an encoder checkpoint");
  EncoderNet<float> net(ckpt.metadata.at("input_dim").get<std::size_t>(),
                        ckpt.metadata.at("hidden_dims").get<std::vector<std::size_t>>(),
                        EncoderTask::from_json(ckpt.metadata.at("task")));
  numkernel::restore(ckpt, net.params());
  return net;
}

template class EncoderNet<float>;
template class EncoderNet<double>;
template float task_loss(const EncoderTask&, const float*, const TaskTarget&, float*);
template double task_loss(const EncoderTask&, const double*, const TaskTarget&, double*);

}  // namespace rsdkit::encoder
