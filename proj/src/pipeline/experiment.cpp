#include "rsdkit/pipeline/experiment.hpp"

#include <algorithm>
#include <regex>

#include <fmt/format.h>

#include "rsdkit/baselines/baselines.hpp"
#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"
#include "rsdkit/common/hash.hpp"
#include "rsdkit/encoder/training.hpp"
#include "rsdkit/numkernel/checkpoint.hpp"
#include "rsdkit/rsdlstm/training.hpp"
#include "rsdkit/synthsurg/dataset_io.hpp"

namespace rsdkit::pipeline {

namespace fs = std::filesystem;
using rsdlstm::VariantKind;

namespace {

const std::vector<std::string> kBases = {"naive-mean",      "naive-median", "phase-gt-mean", "phase-gt-median",
                                         "progress-derived", "rsdnet",      "single",        "timelstm"};
const std::vector<std::string> kEncoderTasks = {"progress-regression", "rsd-regression", "rsd-classification",
                                                "progress-classification", "phase-classification", "random"};

std::string file_safe(const std::string& name) {
  std::string out;
  for (char c : name) out += (c == '[' || c == ']' || c == '=') ? '_' : c;
  return out;
}

std::string fold_dir(int fold) { return "fold" + std::to_string(fold); }

void read_summary(const nlohmann::json& meta, EncoderSummary& s) {
  s.best_iteration = meta.value("best_iteration", std::int64_t{0});
  s.v_loss = meta.value("v_loss", 0.0);
  s.v_metric = meta.value("v_metric", 0.0);
  s.v_mean_predictor_mae = meta.value("v_mean_predictor_mae", 0.0);
}

}  // namespace

bool MethodSpec::uses_lstm() const {
  return base == "rsdnet" || base == "single" || base == "timelstm" || base == "progress-derived";
}

VariantKind MethodSpec::variant() const {
  if (base == "single") return VariantKind::kSingleTask;
  if (base == "timelstm") return VariantKind::kTimeLstm;
  return VariantKind::kRsdNet;
}

MethodSpec parse_method(const std::string& text) {
  static const std::regex re(R"(^([a-z-]+)(?:@([a-z-]+))?(?:\[T1=(\d+)\])?$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw ConfigError("cannot parse method '" + text + "'");
  MethodSpec s;
  s.name = text;
  s.base = m[1];
  if (std::find(kBases.begin(), kBases.end(), s.base) == kBases.end())
    throw ConfigError("unknown method '" + s.base + "'");
  if (m[2].matched) {
    s.encoder_task = m[2];
    if (!s.uses_lstm()) throw ConfigError("method '" + s.base + "' does not use an encoder");
    if (std::find(kEncoderTasks.begin(), kEncoderTasks.end(), s.encoder_task) == kEncoderTasks.end())
      throw ConfigError("unknown encoder task '" + s.encoder_task + "'");
  } else if (s.uses_lstm()) {
    s.encoder_task = s.base == "timelstm" ? "phase-classification" : "progress-regression";
  }
  if (m[3].matched) {
    if (!s.uses_lstm()) throw ConfigError("T1 size only applies to encoder-based methods");
    s.t1_size = std::stoi(m[3]);
  }
  return s;
}

std::vector<MethodSpec> configured_methods(const ExperimentConfig& cfg) {
  std::vector<MethodSpec> out;
  for (const auto& m : cfg.methods) out.push_back(parse_method(m));
  for (int n : cfg.cnn_train_sizes) out.push_back(parse_method(fmt::format("rsdnet[T1={}]", n)));
  return out;
}

Experiment::Experiment(ExperimentConfig cfg, bool force, std::ostream* log)
    : cfg_(std::move(cfg)), force_(force), log_(log) {
  cfg_.validate();
  configured_methods(cfg_);
  cfg_.lstm.s_norm = cfg_.effective_s_norm();
  fs::create_directories(dir());
  const auto cfg_path = dir() / "config.txt";
  write_file_atomic(cfg_path, cfg_.canonical());
}

void Experiment::record_summary(const EncoderSummary& summary) {
  for (const auto& s : encoder_summaries_)
    if (s.key == summary.key) return;
  encoder_summaries_.push_back(summary);
  std::sort(encoder_summaries_.begin(), encoder_summaries_.end(),
            [](const EncoderSummary& a, const EncoderSummary& b) { return a.key < b.key; });
}

void Experiment::note(const std::string& msg) {
  if (log_) *log_ << msg << std::endl;
}

bool Experiment::reuse(const fs::path& p) const { return !force_ && fs::exists(p); }

nlohmann::json Experiment::stamp() const {
  return {{"config_hash", cfg_.hash()}, {"data_seed", cfg_.data_seed}, {"split_seed", cfg_.split_seed}};
}

const synthsurg::Dataset& Experiment::dataset() {
  if (dataset_) return *dataset_;
  const auto path = dir() / "data" / "dataset.rsds";
  if (reuse(path)) {
    dataset_ = std::make_unique<synthsurg::Dataset>(synthsurg::read_dataset(path));
  } else {
    note(fmt::format("generate: {} x {} surgeries", cfg_.preset, cfg_.n_surgeries));
    dataset_ = std::make_unique<synthsurg::Dataset>(
        synthsurg::generate_dataset(cfg_.workflow(), cfg_.n_surgeries, cfg_.data_seed));
    fs::create_directories(path.parent_path());
    synthsurg::write_dataset(path, *dataset_, stamp());
  }
  return *dataset_;
}

const std::vector<synthsurg::DatasetSplit>& Experiment::splits() {
  if (splits_) return *splits_;
  const auto path = dir() / "split" / "splits.json";
  if (reuse(path)) {
    splits_ = synthsurg::read_splits(path);
  } else {
    note(fmt::format("split: {} fold(s), ratios {}", cfg_.n_folds, cfg_.ratios.to_string()));
    splits_ = synthsurg::make_splits(dataset(), cfg_.ratios, cfg_.n_folds, cfg_.split_seed);
    fs::create_directories(path.parent_path());
    auto extra = stamp();
    extra["ratios"] = cfg_.ratios.to_string();
    synthsurg::write_splits(path, *splits_, extra);
  }
  return *splits_;
}

synthsurg::DatasetSplit Experiment::split_for(int fold, int t1_size) {
  const auto& all = splits();
  if (fold < 0 || fold >= static_cast<int>(all.size()))
    throw ConfigError(fmt::format("fold {} outside [0, {})", fold, all.size()));
  const auto& s = all[static_cast<std::size_t>(fold)];
  if (t1_size == 0) return s;
  return synthsurg::with_cnn_train_size(dataset(), s, t1_size, mix_seed(cfg_.split_seed, static_cast<std::uint64_t>(t1_size)));
}

std::string Experiment::encoder_key(const std::string& task, int t1_size) {
  return t1_size ? fmt::format("{}-t1_{}", task, t1_size) : task;
}

const encoder::EncoderNet<float>& Experiment::encoder_net(int fold, const std::string& task, int t1_size) {
  const auto key = fold_dir(fold) + "/" + encoder_key(task, t1_size);
  if (auto it = encoders_.find(key); it != encoders_.end()) return it->second;
  const auto path = dir() / "encoder" / (key + ".rsdc");
  EncoderSummary summary{key, fold, task};
  encoder::EncoderNet<float> net;
  if (reuse(path)) {
    const auto ckpt = numkernel::read_checkpoint(path);
    net = encoder::encoder_from_checkpoint(ckpt);
    read_summary(ckpt.metadata, summary);
  } else {
    auto meta = stamp();
    meta["seed"] = cfg_.encoder.seed;
    meta["train"] = cfg_.encoder.to_json();
    const auto& ds = dataset();
    if (task == "random") {
      note(fmt::format("encoder: {} (untrained)", key));
      net = encoder::random_encoder(static_cast<std::size_t>(ds.spec.feature_dim), cfg_.encoder.hidden_dims,
                                    cfg_.encoder.seed);
    } else {
      note(fmt::format("encoder: training {}", key));
      const auto split = split_for(fold, t1_size);
      const auto t = encoder::EncoderTask::parse(task, cfg_.effective_s_norm(), ds.spec.n_phases);
      auto result = encoder::train_encoder(ds, split, t, cfg_.encoder);
      net = result.net;
      summary.best_iteration = result.best_iteration;
      summary.v_loss = result.best_eval.loss;
      summary.v_metric = result.best_eval.metric;
      summary.v_mean_predictor_mae = result.best_eval.mean_predictor_mae;
      nlohmann::json log = nlohmann::json::array();
      for (const auto& e : result.log) log.push_back({e.iteration, e.train_loss, e.v_loss, e.v_metric});
      meta["log"] = log;
    }
    meta["best_iteration"] = summary.best_iteration;
    meta["v_loss"] = summary.v_loss;
    meta["v_metric"] = summary.v_metric;
    meta["v_mean_predictor_mae"] = summary.v_mean_predictor_mae;
    fs::create_directories(path.parent_path());
    numkernel::write_checkpoint(path, encoder::to_checkpoint(net, meta));
  }
  if (task != "random") record_summary(summary);
  return encoders_.emplace(key, std::move(net)).first->second;
}

const encoder::FeatureSet& Experiment::features(int fold, const std::string& task, int t1_size) {
  const auto key = fold_dir(fold) + "/" + encoder_key(task, t1_size);
  if (auto it = features_.find(key); it != features_.end()) return it->second;
  const auto path = dir() / "features" / (key + ".rsdf");
  encoder::FeatureSet set;
  if (reuse(path)) {
    set = encoder::read_features(path);
  } else {
    const auto& net = encoder_net(fold, task, t1_size);
    note(fmt::format("extract: {}", key));
    set = encoder::extract_dataset(net, dataset());
    set.metadata = stamp();
    set.metadata["encoder"] = key;
    fs::create_directories(path.parent_path());
    encoder::write_features(path, set);
  }
  return features_.emplace(key, std::move(set)).first->second;
}

const rsdlstm::RsdNet<float>& Experiment::lstm(int fold, VariantKind variant, const std::string& task, int t1_size) {
  const auto key = fold_dir(fold) + "/" + rsdlstm::variant_name(variant) + "@" + encoder_key(task, t1_size);
  if (auto it = lstms_.find(key); it != lstms_.end()) return it->second;
  const auto path = dir() / "lstm" / (key + ".rsdc");
  rsdlstm::RsdNet<float> net;
  if (reuse(path)) {
    net = rsdlstm::rsdnet_from_checkpoint(numkernel::read_checkpoint(path));
  } else {
    const auto& feats = features(fold, task, t1_size);
    note(fmt::format("lstm: training {}", key));
    // The sequence model always trains on the split's own T1 u T2.
    auto result = rsdlstm::train_variant(variant, dataset(), split_for(fold, 0), feats, cfg_.lstm);
    net = result.net;
    auto meta = stamp();
    meta["seed"] = cfg_.lstm.seed;
    meta["train"] = cfg_.lstm.to_json();
    meta["best_iteration"] = result.best_iteration;
    meta["best_v_mae"] = result.best_v_mae;
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : result.log) log.push_back({e.iteration, e.train_loss, e.v_mae});
    meta["log"] = log;
    fs::create_directories(path.parent_path());
    numkernel::write_checkpoint(path, rsdlstm::to_checkpoint(net, meta));
  }
  return lstms_.emplace(key, std::move(net)).first->second;
}

std::vector<rsdlstm::PredictionTrace> Experiment::traces(int fold, const MethodSpec& method) {
  const auto path = dir() / "traces" / fold_dir(fold) / (file_safe(method.name) + ".jsonl");
  if (reuse(path)) return rsdlstm::read_traces(path);
  const auto& ds = dataset();
  const auto split = split_for(fold, 0);
  std::vector<rsdlstm::PredictionTrace> out;
  if (method.uses_lstm()) {
    const auto& net = lstm(fold, method.variant(), method.encoder_task, method.t1_size);
    out = rsdlstm::predict(net, ds, features(fold, method.encoder_task, method.t1_size), split.e_ids);
    if (method.base == "progress-derived") {
      const auto stats = baselines::compute_reference_stats(ds, split.train_ids());
      out = baselines::progress_derived_traces(out, {cfg_.prog_floor, cfg_.rsd_cap_factor * stats.t_ref_median});
    }
  } else {
    const auto stats = baselines::compute_reference_stats(ds, split.train_ids());
    if (method.base == "naive-mean") out = baselines::naive_traces(ds, split.e_ids, stats.t_ref_mean);
    else if (method.base == "naive-median") out = baselines::naive_traces(ds, split.e_ids, stats.t_ref_median);
    else if (method.base == "phase-gt-mean")
      out = baselines::phase_inferred_traces(ds, split.e_ids, stats, baselines::Reference::kMean);
    else out = baselines::phase_inferred_traces(ds, split.e_ids, stats, baselines::Reference::kMedian);
  }
  fs::create_directories(path.parent_path());
  rsdlstm::write_traces(path, out);
  return out;
}

nlohmann::json Experiment::report_json(const evalkit::EvalReport& report) const {
  nlohmann::json stage1 = nlohmann::json::array();
  for (const auto& s : encoder_summaries_)
    stage1.push_back({{"encoder", s.key},
                      {"task", s.task},
                      {"best_iteration", s.best_iteration},
                      {"v_loss", s.v_loss},
                      {"v_metric", s.v_metric},
                      {"v_mean_predictor_mae", s.v_mean_predictor_mae}});
  auto j = stamp();
  j["config"] = cfg_.to_json();
  j["stage1"] = stage1;
  j["report"] = report.to_json();
  return j;
}

evalkit::EvalReport Experiment::run() {
  const auto methods = configured_methods(cfg_);
  const auto quartiles = evalkit::Quartiles::from_dataset(dataset());
  std::vector<evalkit::MethodEval> evals;
  for (const auto& m : methods) {
    std::vector<evalkit::MethodEval> per_fold;
    for (int fold : cfg_.folds_to_run()) per_fold.push_back(evalkit::evaluate_method(m.name, traces(fold, m), quartiles));
    evals.push_back(evalkit::aggregate_folds(per_fold));
  }
  // Encoders reused through cached features were never loaded; read their
  // validation summaries from the checkpoints so reruns report the same rows.
  for (const auto& m : methods) {
    if (!m.uses_lstm() || m.encoder_task == "random") continue;
    for (int fold : cfg_.folds_to_run()) {
      EncoderSummary summary{fold_dir(fold) + "/" + encoder_key(m.encoder_task, m.t1_size), fold, m.encoder_task};
      const auto path = dir() / "encoder" / (summary.key + ".rsdc");
      if (!fs::exists(path)) continue;
      read_summary(numkernel::read_checkpoint(path).metadata, summary);
      record_summary(summary);
    }
  }
  auto report = evalkit::build_report(quartiles, evals);
  const auto rdir = dir() / "report";
  fs::create_directories(rdir);
  write_file_atomic(rdir / "report.json", report_json(report).dump(2) + "\n");
  write_file_atomic(rdir / "report.txt", report.to_text());
  write_file_atomic(rdir / "curves.csv", report.curves_csv());
  note("report: " + (rdir / "report.json").string());
  return report;
}

evalkit::EvalReport run_experiment(const ExperimentConfig& cfg, bool force, std::ostream* log) {
  Experiment exp(cfg, force, log);
  return exp.run();
}

evalkit::EvalReport ablate_no_finetune(const ExperimentConfig& cfg, bool force, std::ostream* log) {
  ExperimentConfig c = cfg;
  c.methods = {"rsdnet", "rsdnet@random"};
  c.cnn_train_sizes.clear();
  Experiment exp(c, force, log);
  const auto report = exp.run();
  const auto rdir = exp.dir() / "report";
  write_file_atomic(rdir / "ablate-no-finetune.json", exp.report_json(report).dump(2) + "\n");
  write_file_atomic(rdir / "ablate-no-finetune.txt", report.to_text());
  return report;
}

}  // namespace rsdkit::pipeline
