#include "rsdkit/rsdlstm/model.hpp"

#include <algorithm>
#include <cmath>

#include "rsdkit/common/error.hpp"
#include "rsdkit/numkernel/activations.hpp"
#include "rsdkit/numkernel/loss.hpp"

namespace rsdkit::rsdlstm {

using numkernel::Mode;
using numkernel::ParamRef;
using numkernel::Tensor;

std::string variant_name(VariantKind kind) {
  switch (kind) {
    case VariantKind::kRsdNet: return "rsdnet";
    case VariantKind::kSingleTask: return "single";
    case VariantKind::kTimeLstm: return "timelstm";
  }
  return "unknown";
}

VariantKind parse_variant(const std::string& name) {
  if (name == "rsdnet") return VariantKind::kRsdNet;
  if (name == "single") return VariantKind::kSingleTask;
  if (name == "timelstm") return VariantKind::kTimeLstm;
  throw ConfigError("unknown variant '" + name + "' (rsdnet|single|timelstm)");
}

double normalize_rsd(double rsd_min, double s_norm) {
  if (!(s_norm > 0.0)) throw ConfigError("s_norm > 0 violated");
  return rsd_min / s_norm;
}

double denormalize_rsd(double output, double s_norm) {
  if (!(s_norm > 0.0)) throw ConfigError("s_norm > 0 violated");
  return output * s_norm;
}

double rsd_prediction(double output, double s_norm) { return std::max(0.0, denormalize_rsd(output, s_norm)); }

template <typename Real>
RsdNet<Real>::RsdNet(VariantKind kind_, std::size_t input_dim, std::size_t hidden_, double s_norm_,
                     double dropout_p_)
    : kind(kind_),
      lstm(input_dim, hidden_),
      head_rsd(hidden_ + 1, 1),
      head_prog(hidden_ + 1, 1),
      s_norm(s_norm_),
      dropout_p(dropout_p_) {
  if (!(s_norm > 0.0)) throw ConfigError("s_norm > 0 violated");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("0 <= dropout < 1 violated");
}

template <typename Real>
void RsdNet<Real>::init(std::mt19937_64& rng) {
  lstm.init(rng);
  head_rsd.init_uniform(rng);
  head_prog.init_uniform(rng);
}

template <typename Real>
std::vector<ParamRef<Real>> RsdNet<Real>::params() {
  std::vector<ParamRef<Real>> out = {{"lstm.w_input", &lstm.w_input},
                                     {"lstm.w_hidden", &lstm.w_hidden},
                                     {"lstm.bias", &lstm.bias},
                                     {"head_rsd.weight", &head_rsd.weight},
                                     {"head_rsd.bias", &head_rsd.bias}};
  if (has_progress_head(kind)) {
    out.push_back({"head_prog.weight", &head_prog.weight});
    out.push_back({"head_prog.bias", &head_prog.bias});
  }
  return out;
}

template <typename Real>
std::vector<ParamRef<Real>> RsdNet<Real>::all_tensors() {
  auto out = params();
  if (!has_progress_head(kind)) {
    out.push_back({"head_prog.weight", &head_prog.weight});
    out.push_back({"head_prog.bias", &head_prog.bias});
  }
  return out;
}

template <typename Real>
SequenceOutput<Real> forward_sequence(const RsdNet<Real>& net, std::span<const Real> features,
                                      std::span<const Real> elapsed_min, Mode mode, std::mt19937_64& rng,
                                      SequenceCache<Real>* cache) {
  const std::size_t d = net.input_dim(), h = net.hidden();
  const std::size_t steps = elapsed_min.size();
  if (features.size() != steps * d)
    throw DimensionError("sequence features have " + std::to_string(features.size()) + " values, expected " +
                         std::to_string(steps) + " x " + std::to_string(d));
  SequenceCache<Real> local;
  SequenceCache<Real>& c = cache ? *cache : local;
  c.steps = steps;
  c.x.assign(features.begin(), features.end());
  c.x_mask.assign(steps * d, Real{1});
  numkernel::dropout_inplace<Real>(c.x, net.dropout_p, mode, rng, c.x_mask);
  numkernel::lstm_forward_sequence(net.lstm, c.x.data(), steps, c.lstm);

  c.z = Tensor<Real>({steps, h + 1});
  c.h_mask.assign(steps * h, Real{1});
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy(c.lstm.h.begin() + t * h, c.lstm.h.begin() + (t + 1) * h, c.z.data() + t * (h + 1));
    c.z(t, h) = elapsed_min[t];
  }
  for (std::size_t t = 0; t < steps; ++t)
    numkernel::dropout_inplace<Real>(std::span<Real>(c.z.data() + t * (h + 1), h), net.dropout_p, mode, rng,
                                     std::span<Real>(c.h_mask.data() + t * h, h));

  SequenceOutput<Real> out;
  const auto r = net.head_rsd.forward(c.z);
  out.rsd_raw.assign(r.data(), r.data() + steps);
  if (has_progress_head(net.kind)) {
    const auto p = net.head_prog.forward(c.z);
    out.prog_raw.assign(p.data(), p.data() + steps);
    out.prog.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) out.prog[t] = numkernel::sigmoid(out.prog_raw[t]);
  }
  return out;
}

template <typename Real>
LossParts loss_multitask(const RsdNet<Real>& net, const SequenceOutput<Real>& out, std::span<const double> rsd_true,
                         std::span<const double> prog_true, std::vector<Real>* d_rsd_raw,
                         std::vector<Real>* d_prog_raw) {
  const std::size_t steps = out.rsd_raw.size();
  if (rsd_true.size() != steps) throw DimensionError("rsd labels do not match the sequence length");
  const Real inv_n = Real{1} / static_cast<Real>(steps);
  LossParts parts;
  if (d_rsd_raw) d_rsd_raw->assign(steps, Real{0});
  if (d_prog_raw) d_prog_raw->assign(steps, Real{0});
  for (std::size_t t = 0; t < steps; ++t) {
    const auto l = numkernel::smooth_l1(out.rsd_raw[t], static_cast<Real>(normalize_rsd(rsd_true[t], net.s_norm)));
    parts.rsd += static_cast<double>(l.loss);
    if (d_rsd_raw) (*d_rsd_raw)[t] = l.grad * inv_n;
  }
  if (has_progress_head(net.kind)) {
    if (prog_true.size() != steps) throw DimensionError("progress labels do not match the sequence length");
    for (std::size_t t = 0; t < steps; ++t) {
      const Real p = out.prog[t];
      const auto l = numkernel::smooth_l1(p, static_cast<Real>(prog_true[t]));
      parts.prog += static_cast<double>(l.loss);
      if (d_prog_raw) (*d_prog_raw)[t] = l.grad * p * (Real{1} - p) * inv_n;
    }
  }
  parts.rsd /= static_cast<double>(steps);
  parts.prog /= static_cast<double>(steps);
  return parts;
}

template <typename Real>
void backward_sequence(RsdNet<Real>& net, const SequenceCache<Real>& cache, std::span<const Real> d_rsd_raw,
                       std::span<const Real> d_prog_raw, std::vector<Real>* dx) {
  const std::size_t steps = cache.steps, h = net.hidden(), d = net.input_dim();
  Tensor<Real> dy({steps, 1});
  std::copy(d_rsd_raw.begin(), d_rsd_raw.end(), dy.data());
  Tensor<Real> dz = net.head_rsd.backward(cache.z, dy);
  if (has_progress_head(net.kind)) {
    std::copy(d_prog_raw.begin(), d_prog_raw.end(), dy.data());
    const auto dz_prog = net.head_prog.backward(cache.z, dy);
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += dz_prog[i];
  }
  std::vector<Real> dh(steps * h);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < h; ++j) dh[t * h + j] = dz(t, j) * cache.h_mask[t * h + j];
  std::vector<Real> dx_local;
  if (dx) dx_local.assign(steps * d, Real{0});
  numkernel::lstm_backward_sequence(net.lstm, cache.x.data(), steps, cache.lstm, dh.data(),
                                    dx ? dx_local.data() : nullptr);
  if (dx) {
    for (std::size_t i = 0; i < dx_local.size(); ++i) dx_local[i] *= cache.x_mask[i];
    *dx = std::move(dx_local);
  }
}

numkernel::Checkpoint to_checkpoint(RsdNet<float>& net, nlohmann::json metadata) {
  numkernel::Checkpoint ckpt;
  metadata["kind"] = "rsdlstm";
  metadata["variant"] = variant_name(net.kind);
  metadata["input_dim"] = net.input_dim();
  metadata["hidden"] = net.hidden();
  metadata["s_norm"] = net.s_norm;
  metadata["dropout_p"] = net.dropout_p;
  ckpt.metadata = std::move(metadata);
  ckpt.tensors = numkernel::snapshot(net.all_tensors());
  return ckpt;
}

RsdNet<float> rsdnet_from_checkpoint(const numkernel::Checkpoint& ckpt) {
  if (ckpt.metadata.value("kind", "") != "rsdlstm") throw CheckpointError("not a sequence-model checkpoint");
  RsdNet<float> net(parse_variant(ckpt.metadata.at("variant").get<std::string>()),
                    ckpt.metadata.at("input_dim").get<std::size_t>(), ckpt.metadata.at("hidden").get<std::size_t>(),
                    ckpt.metadata.at("s_norm").get<double>(), ckpt.metadata.at("dropout_p").get<double>());
  numkernel::restore(ckpt, net.all_tensors());
  return net;
}

#define RSDKIT_INSTANTIATE(Real)                                                                                  \
  template struct RsdNet<Real>;                                                                                   \
  template SequenceOutput<Real> forward_sequence(const RsdNet<Real>&, std::span<const Real>,                      \
                                                 std::span<const Real>, Mode, std::mt19937_64&,                   \
                                                 SequenceCache<Real>*);                                           \
  template LossParts loss_multitask(const RsdNet<Real>&, const SequenceOutput<Real>&, std::span<const double>,    \
                                    std::span<const double>, std::vector<Real>*, std::vector<Real>*);             \
  template void backward_sequence(RsdNet<Real>&, const SequenceCache<Real>&, std::span<const Real>,               \
                                  std::span<const Real>, std::vector<Real>*);

RSDKIT_INSTANTIATE(float)
RSDKIT_INSTANTIATE(double)
#undef RSDKIT_INSTANTIATE

}  // namespace rsdkit::rsdlstm
