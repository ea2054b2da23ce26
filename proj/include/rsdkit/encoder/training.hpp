#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rsdkit/encoder/network.hpp"
#include "rsdkit/numkernel/sgd.hpp"
#include "rsdkit/synthsurg/dataset.hpp"
#include "rsdkit/synthsurg/splits.hpp"

namespace rsdkit::encoder {

struct EncoderTrainConfig {
  std::vector<std::size_t> hidden_dims = {64, 64};
  std::int64_t iterations = 5000;
  int batch_size = 48;
  numkernel::SgdConfig sgd{.lr0 = 1e-1, .momentum = 0.9, .weight_decay = 5e-4, .decay_factor = 10.0,
                           .decay_every = 2000};
  double clip_norm = 5.0;
  std::int64_t eval_every = 250;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderTrainConfig from_json(const nlohmann::json& j);
};

struct EncoderLogEntry {
  std::int64_t iteration = 0;
  double train_loss = 0.0;  // mean over the batches since the previous entry
  double v_loss = 0.0;
  double v_metric = 0.0;
};

/// Validation summary. `metric` is progress MAE, rsd MAE in minutes, or
/// accuracy depending on the task; `mean_predictor_mae` is the MAE of a
/// constant equal to the mean training label (regressions only).
struct EncoderEval {
  double loss = 0.0;
  double metric = 0.0;
  double mean_predictor_mae = 0.0;
  std::size_t n_frames = 0;
};

struct EncoderTrainResult {
  EncoderNet<float> net;  // best-on-V weights
  std::vector<EncoderLogEntry> log;
  std::int64_t best_iteration = 0;
  EncoderEval best_eval;
};

/// Trains on minibatches of frames drawn uniformly from all T1 frames and
/// keeps the weights with the lowest task loss on V. Throws SplitError for an
/// empty T1 and NumericError on a non-finite loss.
EncoderTrainResult train_encoder(const synthsurg::Dataset& dataset, const synthsurg::DatasetSplit& split,
                                 const EncoderTask& task, const EncoderTrainConfig& cfg,
                                 const std::function<void(const EncoderLogEntry&)>& on_log = {});

/// Evaluates on every frame of the listed surgeries; `label_mean` is the
/// constant used for mean_predictor_mae.
EncoderEval evaluate_encoder(const EncoderNet<float>& net, const synthsurg::Dataset& dataset,
                             const std::vector<std::string>& ids, double label_mean);

/// Mean regression label (progress or rsd minutes) over all frames of `ids`.
double mean_label(const EncoderTask& task, const synthsurg::Dataset& dataset, const std::vector<std::string>& ids);

/// Untrained network with the standard topology, for the no-finetune ablation.
EncoderNet<float> random_encoder(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                                 std::uint64_t seed);

}  // namespace rsdkit::encoder
