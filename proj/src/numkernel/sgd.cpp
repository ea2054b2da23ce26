#include "rsdkit/numkernel/sgd.hpp"

#include <cmath>
#include <sstream>

#include "rsdkit/common/error.hpp"

namespace rsdkit::numkernel {

void SgdConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("sgd: lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("sgd: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("sgd: weight_decay must be >= 0");
  if (!(decay_factor >= 1.0)) throw ConfigError("sgd: decay_factor must be >= 1");
  if (decay_every <= 0) throw ConfigError("sgd: decay_every must be > 0");
}

double SgdConfig::learning_rate(std::int64_t iteration) const {
  const auto drops = static_cast<double>(iteration / decay_every);
  return lr0 / std::pow(decay_factor, drops);
}

nlohmann::json SgdConfig::to_json() const {
  return {{"lr0", lr0},
          {"momentum", momentum},
          {"weight_decay", weight_decay},
          {"decay_factor", decay_factor},
          {"decay_every", decay_every}};
}

SgdConfig SgdConfig::from_json(const nlohmann::json& j) {
  SgdConfig c;
  c.lr0 = j.at("lr0").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.decay_factor = j.at("decay_factor").get<double>();
  c.decay_every = j.at("decay_every").get<std::int64_t>();
  return c;
}

template <typename Real>
SgdMomentum<Real>::SgdMomentum(SgdConfig cfg) : cfg_(cfg) {
  cfg_.validate();
}

template <typename Real>
void SgdMomentum<Real>::step(std::span<const ParamRef<Real>> params, std::int64_t iteration) {
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) velocity_[i].assign(params[i].tensor->size(), Real{0});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = params[i].tensor->grad();
    double sq = 0.0;
    bool finite = true;
    for (Real v : g) {
      if (!std::isfinite(v)) finite = false;
      sq += static_cast<double>(v) * static_cast<double>(v);
    }
    if (!finite) {
      std::ostringstream os;
      os << "non-finite gradient at iteration " << iteration << " in parameter '" << params[i].name
         << "' (norm " << std::sqrt(sq) << ")";
      throw NumericError(os.str());
    }
  }
  const auto lr = static_cast<Real>(cfg_.learning_rate(iteration));
  const auto mom = static_cast<Real>(cfg_.momentum);
  const auto wd = static_cast<Real>(cfg_.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor->values();
    const auto g = params[i].tensor->grad();
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = mom * v[j] - lr * (g[j] + wd * w[j]);
      w[j] += v[j];
    }
  }
}

template <typename Real>
double clip_grad_norm(std::span<const ParamRef<Real>> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (Real v : p.tensor->grad()) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto scale = static_cast<Real>(max_norm / norm);
    for (const auto& p : params)
      for (Real& v : p.tensor->grad()) v *= scale;
  }
  return norm;
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;
template double clip_grad_norm<float>(std::span<const ParamRef<float>>, double);
template double clip_grad_norm<double>(std::span<const ParamRef<double>>, double);

}  // namespace rsdkit::numkernel
