#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rsdkit/encoder/features.hpp"
#include "rsdkit/numkernel/sgd.hpp"
#include "rsdkit/rsdlstm/model.hpp"
#include "rsdkit/rsdlstm/trace.hpp"
#include "rsdkit/synthsurg/dataset.hpp"
#include "rsdkit/synthsurg/splits.hpp"

namespace rsdkit::rsdlstm {

struct LstmTrainConfig {
  std::size_t hidden = 64;
  double dropout_p = 0.3;
  double s_norm = 5.0;
  std::int64_t iterations = 3000;
  numkernel::SgdConfig sgd{.lr0 = 1e-3, .momentum = 0.9, .weight_decay = 1e-2, .decay_factor = 10.0,
                           .decay_every = 1000};
  double clip_norm = 5.0;
  std::int64_t eval_every = 100;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static LstmTrainConfig from_json(const nlohmann::json& j);
};

struct LstmLogEntry {
  std::int64_t iteration = 0;
  double train_loss = 0.0;  // mean total loss since the previous entry
  double v_mae = 0.0;       // mean per-surgery rsd MAE on V, minutes
};

struct LstmTrainResult {
  RsdNet<float> net;  // best-on-V weights
  std::vector<LstmLogEntry> log;
  std::int64_t best_iteration = 0;
  double best_v_mae = 0.0;
};

/// One iteration is full BPTT over one complete surgery drawn uniformly from
/// T1 u T2. Keeps the weights with the lowest V rsd MAE.
LstmTrainResult train_variant(VariantKind kind, const synthsurg::Dataset& dataset, const synthsurg::DatasetSplit& split,
                              const encoder::FeatureSet& features, const LstmTrainConfig& cfg,
                              const std::function<void(const LstmLogEntry&)>& on_log = {});

/// Eval-mode traces, parallel across surgeries, returned in `ids` order.
std::vector<PredictionTrace> predict(const RsdNet<float>& net, const synthsurg::Dataset& dataset,
                                     const encoder::FeatureSet& features, const std::vector<std::string>& ids);

PredictionTrace predict_one(const RsdNet<float>& net, const synthsurg::FrameSequence& seq,
                            std::span<const float> features);

}  // namespace rsdkit::rsdlstm
