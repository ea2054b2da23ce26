#include "rsdkit/rsdlstm/training.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rsdkit/common/error.hpp"
#include "rsdkit/common/hash.hpp"

namespace rsdkit::rsdlstm {

using numkernel::Mode;

namespace {

std::vector<float> elapsed_f32(const synthsurg::FrameSequence& seq) {
  return {seq.elapsed_min.begin(), seq.elapsed_min.end()};
}

double surgery_mae(const PredictionTrace& tr) {
  double s = 0.0;
  for (std::size_t t = 0; t < tr.size(); ++t) s += std::abs(tr.rsd_pred[t] - tr.rsd_true[t]);
  return s / static_cast<double>(tr.size());
}

double mean_mae(const std::vector<PredictionTrace>& traces) {
  double s = 0.0;
  for (const auto& tr : traces) s += surgery_mae(tr);
  return traces.empty() ? 0.0 : s / static_cast<double>(traces.size());
}

}  // namespace

void LstmTrainConfig::validate() const {
  sgd.validate();
  if (hidden < 1) throw ConfigError("lstm hidden size >= 1 violated");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("0 <= dropout < 1 violated");
  if (!(s_norm > 0.0)) throw ConfigError("s_norm > 0 violated");
  if (iterations < 1 || eval_every < 1) throw ConfigError("lstm iterations and eval_every must be >= 1");
}

nlohmann::json LstmTrainConfig::to_json() const {
  return {{"hidden", hidden},         {"dropout_p", dropout_p}, {"s_norm", s_norm},
          {"iterations", iterations}, {"sgd", sgd.to_json()},   {"clip_norm", clip_norm},
          {"eval_every", eval_every}, {"seed", seed}};
}

LstmTrainConfig LstmTrainConfig::from_json(const nlohmann::json& j) {
  LstmTrainConfig c;
  c.hidden = j.at("hidden").get<std::size_t>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.s_norm = j.at("s_norm").get<double>();
  c.iterations = j.at("iterations").get<std::int64_t>();
  c.sgd = numkernel::SgdConfig::from_json(j.at("sgd"));
  c.clip_norm = j.at("clip_norm").get<double>();
  c.eval_every = j.at("eval_every").get<std::int64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

PredictionTrace predict_one(const RsdNet<float>& net, const synthsurg::FrameSequence& seq,
                            std::span<const float> features) {
  std::mt19937_64 unused(0);
  const auto elapsed = elapsed_f32(seq);
  const auto out = forward_sequence<float>(net, features, elapsed, Mode::kEval, unused);
  PredictionTrace tr;
  tr.surgery_id = seq.surgery_id;
  tr.elapsed_min = seq.elapsed_min;
  tr.rsd_true = seq.rsd_min;
  tr.rsd_pred.resize(out.rsd_raw.size());
  for (std::size_t t = 0; t < out.rsd_raw.size(); ++t) tr.rsd_pred[t] = rsd_prediction(out.rsd_raw[t], net.s_norm);
  tr.prog_pred.assign(out.prog.begin(), out.prog.end());
  return tr;
}

std::vector<PredictionTrace> predict(const RsdNet<float>& net, const synthsurg::Dataset& dataset,
                                     const encoder::FeatureSet& features, const std::vector<std::string>& ids) {
  if (features.dim != net.input_dim())
    throw CheckpointError(fmt::format("model expects {}-dim features, feature file has {}", net.input_dim(), features.dim));
  std::vector<PredictionTrace> out(ids.size());
  const auto n = static_cast<std::ptrdiff_t>(ids.size());
  std::vector<const std::vector<float>*> feats;
  for (const auto& id : ids) feats.push_back(&features.of(id));
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = predict_one(net, dataset.at(ids[k]).frames, *feats[k]);
  }
  return out;
}

LstmTrainResult train_variant(VariantKind kind, const synthsurg::Dataset& dataset, const synthsurg::DatasetSplit& split,
                              const encoder::FeatureSet& features, const LstmTrainConfig& cfg,
                              const std::function<void(const LstmLogEntry&)>& on_log) {
  cfg.validate();
  const auto train_ids = split.train_ids();
  if (train_ids.empty()) throw SplitError("sequence training needs a non-empty T1 u T2");
  const auto& v_ids = split.v_ids.empty() ? train_ids : split.v_ids;
  std::vector<const std::vector<float>*> train_feats;
  std::vector<std::vector<float>> train_elapsed;
  for (const auto& id : train_ids) {
    train_feats.push_back(&features.of(id));
    train_elapsed.push_back(elapsed_f32(dataset.at(id).frames));
  }

  std::mt19937_64 init_rng(mix_seed(cfg.seed, "lstm-init"));
  std::mt19937_64 pick_rng(mix_seed(cfg.seed, "lstm-sequences"));
  std::mt19937_64 drop_rng(mix_seed(cfg.seed, "lstm-dropout"));
  RsdNet<float> net(kind, features.dim, cfg.hidden, cfg.s_norm, cfg.dropout_p);
  net.init(init_rng);
  auto params = net.params();
  numkernel::SgdMomentum<float> opt(cfg.sgd);

  LstmTrainResult result;
  result.net = net;
  result.best_v_mae = mean_mae(predict(net, dataset, features, v_ids));
  std::uniform_int_distribution<std::size_t> pick(0, train_ids.size() - 1);
  SequenceCache<float> cache;
  std::vector<float> d_rsd, d_prog;
  double running = 0.0;
  std::int64_t running_n = 0;

  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    const std::size_t k = pick(pick_rng);
    const auto& seq = dataset.at(train_ids[k]).frames;
    const auto out = forward_sequence<float>(net, *train_feats[k], train_elapsed[k], Mode::kTrain, drop_rng, &cache);
    const auto loss = loss_multitask<float>(net, out, seq.rsd_min, seq.progress, &d_rsd, &d_prog);
    if (!std::isfinite(loss.total()))
      throw NumericError(fmt::format("sequence loss is {} at iteration {} (surgery {})", loss.total(), it, seq.surgery_id));
    numkernel::zero_grads<float>(params);
    backward_sequence<float>(net, cache, d_rsd, d_prog);
    numkernel::clip_grad_norm<float>(params, cfg.clip_norm);
    opt.step(params, it);
    running += loss.total();
    ++running_n;

    if ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations) {
      const double v_mae = mean_mae(predict(net, dataset, features, v_ids));
      LstmLogEntry entry{it + 1, running / static_cast<double>(running_n), v_mae};
      running = 0.0;
      running_n = 0;
      result.log.push_back(entry);
      if (on_log) on_log(entry);
      if (v_mae < result.best_v_mae) {
        result.best_v_mae = v_mae;
        result.best_iteration = it + 1;
        result.net = net;
      }
    }
  }
  return result;
}

}  // namespace rsdkit::rsdlstm
