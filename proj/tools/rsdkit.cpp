// rsdkit: command line front end for dataset generation, the two training
// stages, baselines, evaluation and the end-to-end experiment runner.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rsdkit/baselines/baselines.hpp"
#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"
#include "rsdkit/common/threads.hpp"
#include "rsdkit/encoder/features.hpp"
#include "rsdkit/encoder/training.hpp"
#include "rsdkit/evalkit/evaluation.hpp"
#include "rsdkit/numkernel/checkpoint.hpp"
#include "rsdkit/pipeline/config.hpp"
#include "rsdkit/pipeline/experiment.hpp"
#include "rsdkit/rsdlstm/cells.hpp"
#include "rsdkit/rsdlstm/training.hpp"
#include "rsdkit/synthsurg/dataset_io.hpp"

namespace fs = std::filesystem;
using namespace rsdkit;

namespace {

struct Common {
  bool force = false;
  int threads = 0;
  std::string config_file;
  std::vector<std::string> overrides;
};

void guard_output(const fs::path& out, bool force) {
  if (fs::exists(out) && !force) throw ConfigError(out.string() + " exists; pass --force to overwrite");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
}

pipeline::ExperimentConfig resolve_config(const Common& c) {
  pipeline::ExperimentConfig cfg = c.config_file.empty() ? pipeline::ExperimentConfig{} : pipeline::load_config(c.config_file);
  pipeline::apply_overrides(cfg, c.overrides);
  if (c.threads > 0) cfg.threads = c.threads;
  return cfg;
}

void add_config_options(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "Experiment config file (key = value)");
  app->add_option("--set", c.overrides, "Override a config key: key=value")->allow_extra_args(false);
}

synthsurg::DatasetSplit load_fold(const std::string& splits_path, const std::string& fold) {
  const auto all = synthsurg::read_splits(splits_path);
  const int k = synthsurg::parse_fold(fold);
  if (k >= static_cast<int>(all.size()))
    throw ConfigError(fmt::format("fold {} not in {} ({} folds)", k, splits_path, all.size()));
  return all[static_cast<std::size_t>(k)];
}

const std::vector<std::string>& subset(const synthsurg::DatasetSplit& s, const std::string& which) {
  if (which == "t1") return s.t1_ids;
  if (which == "t2") return s.t2_ids;
  if (which == "v") return s.v_ids;
  if (which == "e") return s.e_ids;
  throw ConfigError("subset must be one of t1, t2, v, e");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remaining surgery duration toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (also RSDKIT_THREADS)");
  app.add_flag("--force", common.force, "Overwrite existing outputs");

  // generate
  std::string preset = "cholec", out, data, splits_path, fold = "0", ckpt, features_path;
  int n_surgeries = 120;
  std::uint64_t seed = 42;
  double time_scale = 1.0;
  std::string csv_out, jsonl_out;
  auto add_generate = [&](CLI::App* parent, const std::string& name) {
    auto* g = parent->add_subcommand(name, "Generate a synthetic dataset (RSDS file)");
    g->add_option("--preset", preset, "cholec or bypass");
    g->add_option("--n", n_surgeries, "Number of surgeries");
    g->add_option("--seed", seed, "Master seed");
    g->add_option("--time-scale", time_scale, "Divides all durations; labels stay in simulated minutes");
    g->add_option("--out", out, "Output file")->required();
    g->add_option("--csv", csv_out, "Also export one row per frame as CSV");
    g->add_option("--jsonl", jsonl_out, "Also export one object per frame as JSONL");
    g->add_flag("--force", common.force, "Overwrite existing outputs");
    return g;
  };
  auto* generate = add_generate(&app, "generate");
  auto* synth = app.add_subcommand("synthsurg", "Synthetic data tools");
  synth->require_subcommand(1);
  auto* synth_generate = add_generate(synth, "generate");

  // split
  std::string ratios = "1/3,1/3,1/12,1/4";
  int n_folds = 1;
  auto* split = app.add_subcommand("split", "Duration-stratified T1/T2/V/E splits");
  split->add_option("--data", data, "Dataset file")->required();
  split->add_option("--ratios", ratios, "t1,t2,v,e ratios (fractions allowed)");
  split->add_option("--folds", n_folds, "Number of folds");
  split->add_option("--seed", seed, "Split seed");
  split->add_option("--out", out, "Output JSON")->required();
  split->add_flag("--force", common.force, "Overwrite existing outputs");

  // encoder
  std::string task = "progress-regression";
  auto* enc = app.add_subcommand("encoder", "Frame encoder");
  enc->require_subcommand(1);
  auto* enc_train = enc->add_subcommand("train", "Train on T1 of a fold");
  enc_train->add_option("--task", task, "progress-regression|rsd-regression|rsd-classification|progress-classification|phase-classification");
  enc_train->add_option("--data", data, "Dataset file")->required();
  enc_train->add_option("--splits", splits_path, "Split file")->required();
  enc_train->add_option("--split,--fold", fold, "Fold, e.g. fold0");
  enc_train->add_option("--out", out, "Checkpoint file")->required();
  enc_train->add_flag("--force", common.force, "Overwrite existing outputs");
  add_config_options(enc_train, common);
  auto* enc_extract = enc->add_subcommand("extract", "Extract penultimate-layer features");
  enc_extract->add_option("--ckpt", ckpt, "Encoder checkpoint")->required();
  enc_extract->add_option("--data", data, "Dataset file")->required();
  enc_extract->add_option("--out", out, "Feature file (RSDF)")->required();
  enc_extract->add_flag("--force", common.force, "Overwrite existing outputs");

  // rsdlstm
  std::string variant = "rsdnet", which = "e", surgery;
  auto* lstm = app.add_subcommand("rsdlstm", "Sequence model");
  lstm->require_subcommand(1);
  auto* lstm_train = lstm->add_subcommand("train", "Train on T1 u T2 of a fold");
  lstm_train->add_option("--variant", variant, "rsdnet|single|timelstm");
  lstm_train->add_option("--data", data, "Dataset file")->required();
  lstm_train->add_option("--splits", splits_path, "Split file")->required();
  lstm_train->add_option("--fold,--split", fold, "Fold, e.g. 0 or fold0");
  lstm_train->add_option("--features", features_path, "Feature file from `encoder extract`")->required();
  lstm_train->add_option("--out", out, "Checkpoint file")->required();
  lstm_train->add_flag("--force", common.force, "Overwrite existing outputs");
  add_config_options(lstm_train, common);
  auto* lstm_predict = lstm->add_subcommand("predict", "Write eval-mode traces");
  lstm_predict->add_option("--ckpt", ckpt, "Sequence-model checkpoint")->required();
  lstm_predict->add_option("--data", data, "Dataset file")->required();
  lstm_predict->add_option("--features", features_path, "Feature file")->required();
  lstm_predict->add_option("--splits", splits_path, "Split file")->required();
  lstm_predict->add_option("--fold,--split", fold, "Fold");
  lstm_predict->add_option("--subset", which, "t1|t2|v|e");
  lstm_predict->add_option("--out", out, "Trace JSONL")->required();
  lstm_predict->add_flag("--force", common.force, "Overwrite existing outputs");
  auto* lstm_cells = lstm->add_subcommand("cells", "Dump LSTM cell states for one surgery");
  lstm_cells->add_option("--ckpt", ckpt, "Sequence-model checkpoint")->required();
  lstm_cells->add_option("--data", data, "Dataset file")->required();
  lstm_cells->add_option("--features", features_path, "Feature file")->required();
  lstm_cells->add_option("--surgery", surgery, "Surgery id")->required();
  lstm_cells->add_option("--out", out, "CSV file")->required();
  lstm_cells->add_flag("--force", common.force, "Overwrite existing outputs");

  // baselines
  std::string method, progress_traces;
  auto* base = app.add_subcommand("baselines", "Closed-form estimators");
  base->require_subcommand(1);
  auto* base_run = base->add_subcommand("run", "Write baseline traces for E of a fold");
  base_run->add_option("--method", method, "naive-mean|naive-median|phase-gt-mean|phase-gt-median|progress-derived")->required();
  base_run->add_option("--data", data, "Dataset file")->required();
  base_run->add_option("--splits", splits_path, "Split file")->required();
  base_run->add_option("--fold,--split", fold, "Fold");
  base_run->add_option("--progress-traces", progress_traces, "Traces with prog_pred (progress-derived only)");
  base_run->add_option("--out", out, "Trace JSONL")->required();
  base_run->add_flag("--force", common.force, "Overwrite existing outputs");
  add_config_options(base_run, common);

  // evaluate
  std::vector<std::string> trace_args;
  std::string out_dir;
  auto* evaluate = app.add_subcommand("evaluate", "MAE tables, curves and under/over table");
  evaluate->add_option("--data", data, "Dataset file")->required();
  evaluate->add_option("--traces", trace_args, "name=path.jsonl (repeatable)")->required();
  evaluate->add_option("--out-dir", out_dir, "Directory for report.json, report.txt, curves.csv")->required();
  evaluate->add_flag("--force", common.force, "Overwrite existing outputs");

  // run / ablate
  std::string methods, cnn_sizes, run_out;
  int run_folds = 0;
  auto add_run_options = [&](CLI::App* r) {
    add_config_options(r, common);
    r->add_option("--preset", preset, "cholec or bypass");
    r->add_option("--n", n_surgeries, "Number of surgeries");
    r->add_option("--seed", seed, "Data seed");
    r->add_option("--time-scale", time_scale, "Time compression");
    r->add_option("--folds", run_folds, "Number of folds (all are run)");
    r->add_option("--methods", methods, "Comma-separated methods, base[@encoder-task]");
    r->add_option("--cnn-train-sizes", cnn_sizes, "Comma-separated T1 sizes for extra rsdnet rows");
    r->add_option("--out", run_out, "Output root (artifacts go to <out>/<config hash>/)");
    r->add_flag("--force", common.force, "Recompute and overwrite existing artifacts");
  };
  auto* run = app.add_subcommand("run", "End-to-end experiment");
  add_run_options(run);
  auto* ablate = app.add_subcommand("ablate-no-finetune", "RSDNet on a frozen random encoder vs the finetuned one");
  add_run_options(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kConfig);
  }

  try {
    configure_threads(common.threads);

    if (generate->parsed() || synth_generate->parsed()) {
      guard_output(out, common.force);
      auto spec = synthsurg::preset(preset);
      spec.time_scale = time_scale;
      spec.validate();
      if (n_surgeries < 1) throw ConfigError("n_surgeries >= 1 violated");
      const auto ds = synthsurg::generate_dataset(spec, n_surgeries, seed);
      synthsurg::write_dataset(out, ds);
      if (!csv_out.empty()) synthsurg::export_csv(csv_out, ds);
      if (!jsonl_out.empty()) synthsurg::export_jsonl(jsonl_out, ds);
      std::cerr << fmt::format("wrote {} surgeries to {}\n", ds.surgeries.size(), out);
    } else if (split->parsed()) {
      guard_output(out, common.force);
      const auto ds = synthsurg::read_dataset(data);
      const auto r = synthsurg::SplitRatios::parse(ratios);
      synthsurg::write_splits(out, synthsurg::make_splits(ds, r, n_folds, seed),
                              {{"split_seed", seed}, {"ratios", r.to_string()}});
    } else if (enc_train->parsed()) {
      guard_output(out, common.force);
      const auto cfg = resolve_config(common);
      const auto ds = synthsurg::read_dataset(data);
      const auto s = load_fold(splits_path, fold);
      const double s_norm = cfg.s_norm > 0 ? cfg.s_norm : synthsurg::default_s_norm(ds.spec.name);
      const auto t = encoder::EncoderTask::parse(task, s_norm, ds.spec.n_phases);
      auto result = encoder::train_encoder(ds, s, t, cfg.encoder, [](const encoder::EncoderLogEntry& e) {
        std::cerr << fmt::format("iter {:>6}  train {:.5f}  V loss {:.5f}  V metric {:.5f}\n", e.iteration,
                                 e.train_loss, e.v_loss, e.v_metric);
      });
      nlohmann::json meta = {{"config_hash", cfg.hash()}, {"seed", cfg.encoder.seed},
                             {"best_iteration", result.best_iteration}, {"v_loss", result.best_eval.loss},
                             {"v_metric", result.best_eval.metric},
                             {"v_mean_predictor_mae", result.best_eval.mean_predictor_mae}};
      numkernel::write_checkpoint(out, encoder::to_checkpoint(result.net, meta));
    } else if (enc_extract->parsed()) {
      guard_output(out, common.force);
      const auto net = encoder::encoder_from_checkpoint(numkernel::read_checkpoint(ckpt));
      auto set = encoder::extract_dataset(net, synthsurg::read_dataset(data));
      set.metadata = {{"encoder", ckpt}};
      encoder::write_features(out, set);
    } else if (lstm_train->parsed()) {
      guard_output(out, common.force);
      auto cfg = resolve_config(common);
      const auto ds = synthsurg::read_dataset(data);
      const auto s = load_fold(splits_path, fold);
      const auto feats = encoder::read_features(features_path);
      cfg.lstm.s_norm = cfg.s_norm > 0 ? cfg.s_norm : synthsurg::default_s_norm(ds.spec.name);
      auto result = rsdlstm::train_variant(rsdlstm::parse_variant(variant), ds, s, feats, cfg.lstm,
                                           [](const rsdlstm::LstmLogEntry& e) {
                                             std::cerr << fmt::format("iter {:>6}  train {:.5f}  V MAE {:.3f} min\n",
                                                                      e.iteration, e.train_loss, e.v_mae);
                                           });
      nlohmann::json meta = {{"config_hash", cfg.hash()}, {"seed", cfg.lstm.seed},
                             {"best_iteration", result.best_iteration}, {"best_v_mae", result.best_v_mae}};
      numkernel::write_checkpoint(out, rsdlstm::to_checkpoint(result.net, meta));
    } else if (lstm_predict->parsed()) {
      guard_output(out, common.force);
      const auto net = rsdlstm::rsdnet_from_checkpoint(numkernel::read_checkpoint(ckpt));
      const auto ds = synthsurg::read_dataset(data);
      const auto s = load_fold(splits_path, fold);
      rsdlstm::write_traces(out, rsdlstm::predict(net, ds, encoder::read_features(features_path), subset(s, which)));
    } else if (lstm_cells->parsed()) {
      guard_output(out, common.force);
      const auto net = rsdlstm::rsdnet_from_checkpoint(numkernel::read_checkpoint(ckpt));
      const auto ds = synthsurg::read_dataset(data);
      const auto feats = encoder::read_features(features_path);
      rsdlstm::write_cells_csv(out, rsdlstm::dump_cell_activations(net, ds.at(surgery).frames, feats.of(surgery)));
    } else if (base_run->parsed()) {
      guard_output(out, common.force);
      const auto cfg = resolve_config(common);
      const auto ds = synthsurg::read_dataset(data);
      const auto s = load_fold(splits_path, fold);
      const auto st = baselines::compute_reference_stats(ds, s.train_ids());
      std::vector<rsdlstm::PredictionTrace> traces;
      if (method == "naive-mean") traces = baselines::naive_traces(ds, s.e_ids, st.t_ref_mean);
      else if (method == "naive-median") traces = baselines::naive_traces(ds, s.e_ids, st.t_ref_median);
      else if (method == "phase-gt-mean") traces = baselines::phase_inferred_traces(ds, s.e_ids, st, baselines::Reference::kMean);
      else if (method == "phase-gt-median") traces = baselines::phase_inferred_traces(ds, s.e_ids, st, baselines::Reference::kMedian);
      else if (method == "progress-derived") {
        if (progress_traces.empty()) throw PipelineOrderError("progress-derived needs --progress-traces from `rsdlstm predict`");
        traces = baselines::progress_derived_traces(rsdlstm::read_traces(progress_traces),
                                                    {cfg.prog_floor, cfg.rsd_cap_factor * st.t_ref_median});
      } else {
        throw ConfigError("unknown baseline '" + method + "'");
      }
      rsdlstm::write_traces(out, traces);
    } else if (evaluate->parsed()) {
      const fs::path dir = out_dir;
      guard_output(dir / "report.json", common.force);
      const auto ds = synthsurg::read_dataset(data);
      const auto q = evalkit::Quartiles::from_dataset(ds);
      std::vector<evalkit::MethodEval> evals;
      for (const auto& arg : trace_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos) throw ConfigError("--traces expects name=path, got '" + arg + "'");
        evals.push_back(evalkit::evaluate_method(arg.substr(0, eq), rsdlstm::read_traces(arg.substr(eq + 1)), q));
      }
      const auto report = evalkit::build_report(q, evals);
      write_file_atomic(dir / "report.json", report.to_json().dump(2) + "\n");
      write_file_atomic(dir / "report.txt", report.to_text());
      write_file_atomic(dir / "curves.csv", report.curves_csv());
      std::cout << report.to_text();
    } else if (run->parsed() || ablate->parsed()) {
      auto* sub = run->parsed() ? run : ablate;
      auto cfg = resolve_config(common);
      if (sub->count("--preset")) cfg.preset = preset;
      if (sub->count("--n")) cfg.n_surgeries = n_surgeries;
      if (sub->count("--seed")) cfg.data_seed = seed;
      if (sub->count("--time-scale")) cfg.time_scale = time_scale;
      if (sub->count("--folds")) {
        cfg.n_folds = run_folds;
        cfg.folds.clear();
      }
      if (sub->count("--methods")) cfg.set("methods", methods);
      if (sub->count("--cnn-train-sizes")) cfg.set("cnn_train_sizes", cnn_sizes);
      if (sub->count("--out")) cfg.output_dir = run_out;
      const auto report = run->parsed() ? pipeline::run_experiment(cfg, common.force, &std::cerr)
                                        : pipeline::ablate_no_finetune(cfg, common.force, &std::cerr);
      std::cout << report.to_text();
    }
  } catch (const Error& e) {
    std::cerr << "rsdkit: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "rsdkit: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  }
  return 0;
}
