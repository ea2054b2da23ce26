#include "rsdkit/encoder/training.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "rsdkit/common/error.hpp"
#include "rsdkit/common/hash.hpp"

namespace rsdkit::encoder {

namespace {

using numkernel::Tensor;

struct FrameRef {
  const synthsurg::FrameSequence* seq;
  std::int64_t t;
};

TaskTarget target_of(const EncoderTask& task, const FrameRef& f) {
  return label_for_task(task, f.seq->progress[f.t], f.seq->rsd_min[f.t], f.seq->phase_id[f.t]);
}

constexpr std::size_t kEvalChunk = 1024;

}  // namespace

void EncoderTrainConfig::validate() const {
  sgd.validate();
  if (hidden_dims.empty()) throw ConfigError("encoder hidden_dims must be non-empty");
  if (iterations < 1 || batch_size < 1 || eval_every < 1) throw ConfigError("encoder iterations, batch and eval_every must be >= 1");
}

nlohmann::json EncoderTrainConfig::to_json() const {
  return {{"hidden_dims", hidden_dims}, {"iterations", iterations}, {"batch_size", batch_size},
          {"sgd", sgd.to_json()},       {"clip_norm", clip_norm},   {"eval_every", eval_every},
          {"seed", seed}};
}

EncoderTrainConfig EncoderTrainConfig::from_json(const nlohmann::json& j) {
  EncoderTrainConfig c;
  c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  c.iterations = j.at("iterations").get<std::int64_t>();
  c.batch_size = j.at("batch_size").get<int>();
  c.sgd = numkernel::SgdConfig::from_json(j.at("sgd"));
  c.clip_norm = j.at("clip_norm").get<double>();
  c.eval_every = j.at("eval_every").get<std::int64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

double mean_label(const EncoderTask& task, const synthsurg::Dataset& dataset, const std::vector<std::string>& ids) {
  if (task.is_classification()) return 0.0;
  long double sum = 0.0L;
  std::size_t n = 0;
  for (const auto& id : ids) {
    const auto& f = dataset.at(id).frames;
    for (std::int64_t t = 0; t < f.n_frames; ++t, ++n)
      sum += task.kind == TaskKind::kProgressRegression ? f.progress[t] : f.rsd_min[t];
  }
  return n ? static_cast<double>(sum / n) : 0.0;
}

EncoderEval evaluate_encoder(const EncoderNet<float>& net, const synthsurg::Dataset& dataset,
                             const std::vector<std::string>& ids, double label_mean) {
  const auto& task = net.task();
  const std::size_t dim = net.input_dim();
  const auto k = static_cast<std::size_t>(task.output_dim());
  EncoderEval ev;
  double loss = 0.0, metric = 0.0, mean_err = 0.0;
  std::vector<float> grad(k);
  for (const auto& id : ids) {
    const auto& f = dataset.at(id).frames;
    for (std::int64_t start = 0; start < f.n_frames; start += kEvalChunk) {
      const auto n = std::min<std::size_t>(kEvalChunk, static_cast<std::size_t>(f.n_frames - start));
      Tensor<float> x({n, dim});
      std::copy(f.frame(start), f.frame(start) + n * dim, x.data());
      const auto out = net.forward(x);
      for (std::size_t r = 0; r < n; ++r) {
        const FrameRef ref{&f, start + static_cast<std::int64_t>(r)};
        const auto target = target_of(task, ref);
        loss += task_loss(task, out.data() + r * k, target, grad.data());
        if (task.is_classification()) {
          const float* row = out.data() + r * k;
          metric += (std::max_element(row, row + k) - row) == target.cls ? 1.0 : 0.0;
        } else {
          const double truth = task.kind == TaskKind::kProgressRegression ? f.progress[ref.t] : f.rsd_min[ref.t];
          metric += std::abs(regression_prediction(task, out(r, 0)) - truth);
          mean_err += std::abs(label_mean - truth);
        }
        ++ev.n_frames;
      }
    }
  }
  if (ev.n_frames) {
    const auto n = static_cast<double>(ev.n_frames);
    ev.loss = loss / n;
    ev.metric = metric / n;
    ev.mean_predictor_mae = mean_err / n;
  }
  return ev;
}

EncoderTrainResult train_encoder(const synthsurg::Dataset& dataset, const synthsurg::DatasetSplit& split,
                                 const EncoderTask& task, const EncoderTrainConfig& cfg,
                                 const std::function<void(const EncoderLogEntry&)>& on_log) {
  cfg.validate();
  task.validate();
  if (split.t1_ids.empty()) throw SplitError("encoder training needs a non-empty T1");
  std::vector<FrameRef> pool;
  for (const auto& id : split.t1_ids) {
    const auto& f = dataset.at(id).frames;
    for (std::int64_t t = 0; t < f.n_frames; ++t) pool.push_back({&f, t});
  }
  const auto& v_ids = split.v_ids.empty() ? split.t1_ids : split.v_ids;
  const double label_mean = mean_label(task, dataset, split.t1_ids);

  std::mt19937_64 init_rng(mix_seed(cfg.seed, "encoder-init"));
  std::mt19937_64 batch_rng(mix_seed(cfg.seed, "encoder-batches"));
  EncoderNet<float> net(static_cast<std::size_t>(dataset.spec.feature_dim), cfg.hidden_dims, task);
  net.init(init_rng);
  auto params = net.params();
  numkernel::SgdMomentum<float> opt(cfg.sgd);

  EncoderTrainResult result;
  result.best_eval = evaluate_encoder(net, dataset, v_ids, label_mean);
  result.net = net;
  const std::size_t dim = net.input_dim();
  const auto k = static_cast<std::size_t>(task.output_dim());
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  Tensor<float> x({bs, dim}), dout({bs, k});
  std::vector<TaskTarget> targets(bs);
  EncoderNet<float>::Cache cache;
  double running = 0.0;
  std::int64_t running_n = 0;

  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t b = 0; b < bs; ++b) {
      const auto& ref = pool[pick(batch_rng)];
      std::copy(ref.seq->frame(ref.t), ref.seq->frame(ref.t) + dim, x.data() + b * dim);
      targets[b] = target_of(task, ref);
    }
    const auto out = net.forward(x, &cache);
    double loss = 0.0;
    for (std::size_t b = 0; b < bs; ++b) {
      loss += task_loss(task, out.data() + b * k, targets[b], dout.data() + b * k);
    }
    loss /= static_cast<double>(bs);
    if (!std::isfinite(loss)) throw NumericError(fmt::format("encoder loss is {} at iteration {}", loss, it));
    for (auto& g : dout.values()) g /= static_cast<float>(bs);
    numkernel::zero_grads<float>(params);
    net.backward(cache, dout);
    numkernel::clip_grad_norm<float>(params, cfg.clip_norm);
    opt.step(params, it);
    running += loss;
    ++running_n;

    if ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations) {
      const auto ev = evaluate_encoder(net, dataset, v_ids, label_mean);
      EncoderLogEntry entry{it + 1, running / static_cast<double>(running_n), ev.loss, ev.metric};
      running = 0.0;
      running_n = 0;
      result.log.push_back(entry);
      if (on_log) on_log(entry);
      if (ev.loss < result.best_eval.loss) {
        result.best_eval = ev;
        result.best_iteration = it + 1;
        result.net = net;
      }
    }
  }
  return result;
}

EncoderNet<float> random_encoder(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                                 std::uint64_t seed) {
  EncoderNet<float> net(input_dim, hidden_dims, EncoderTask::progress_regression());
  std::mt19937_64 rng(mix_seed(seed, "encoder-init"));
  net.init(rng);
  return net;
}

}  // namespace rsdkit::encoder
