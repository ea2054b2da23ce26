#include <cmath>
#include <limits>
#include <random>

#include <omp.h>

#include <gtest/gtest.h>

#include "fragments.hpp"
#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"
#include "rsdkit/encoder/features.hpp"
#include "rsdkit/encoder/training.hpp"
#include "rsdkit/numkernel/checkpoint.hpp"
#include "rsdkit/rsdlstm/cells.hpp"
#include "rsdkit/rsdlstm/trace.hpp"
#include "rsdkit/rsdlstm/training.hpp"
#include "rsdkit/synthsurg/dataset.hpp"
#include "test_util.hpp"

using namespace rsdkit;
using namespace rsdkit::rsdlstm;
using numkernel::Mode;

namespace {

std::vector<float> random_features(std::size_t steps, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return test::uniform_vector<float>(steps * d, rng);
}

std::vector<float> elapsed_of(std::size_t steps, float dt = 0.5f) {
  std::vector<float> e(steps);
  for (std::size_t t = 0; t < steps; ++t) e[t] = dt * static_cast<float>(t + 1);
  return e;
}

RsdNet<float> random_net(VariantKind kind, std::size_t d, std::size_t h, std::uint64_t seed) {
  RsdNet<float> net(kind, d, h, 5.0, 0.3);
  std::mt19937_64 rng(seed);
  net.init(rng);
  return net;
}

}  // namespace

// ---- normalization ----

TEST(Normalization, Examples) {
  EXPECT_EQ(normalize_rsd(40.0, 5.0), 8.0);
  EXPECT_EQ(denormalize_rsd(8.0, 5.0), 40.0);
  EXPECT_EQ(normalize_rsd(0.0, 5.0), 0.0);
  EXPECT_EQ(denormalize_rsd(0.0, 5.0), 0.0);
  EXPECT_DOUBLE_EQ(denormalize_rsd(-0.3, 10.0), -3.0);
  EXPECT_EQ(rsd_prediction(-0.3, 10.0), 0.0);
  EXPECT_THROW(normalize_rsd(1.0, 0.0), ConfigError);
  EXPECT_THROW(denormalize_rsd(1.0, -2.0), ConfigError);
}

TEST(Normalization, RoundTripExactAtF32) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 200.0f);
  for (double s : {5.0, 10.0}) {
    for (int i = 0; i < 10000; ++i) {
      const float x = u(rng);
      const auto back = static_cast<float>(denormalize_rsd(normalize_rsd(x, s), s));
      ASSERT_EQ(back, x);
      ASSERT_GE(rsd_prediction(normalize_rsd(x, s), s), 0.0);
    }
  }
}

TEST(Normalization, CholecTargetsWithinZeroToTwenty) {
  auto spec = synthsurg::cholec_preset();
  spec.time_scale = 0.2;
  const auto ds = synthsurg::generate_dataset(spec, 120, 42);
  double hi = 0.0;
  for (const auto& s : ds.surgeries)
    for (double r : s.frames.rsd_min) {
      const double t = normalize_rsd(r, synthsurg::default_s_norm("cholec"));
      ASSERT_GE(t, 0.0);
      hi = std::max(hi, t);
    }
  EXPECT_LE(hi, 20.0);
}

// ---- forward ----

TEST(Forward, ZeroParameters) {
  RsdNet<float> net(VariantKind::kRsdNet, 4, 3, 5.0, 0.3);
  const auto x = random_features(9, 4, 1);
  std::mt19937_64 rng(0);
  const auto out = forward_sequence<float>(net, x, elapsed_of(9), Mode::kEval, rng);
  for (std::size_t t = 0; t < 9; ++t) {
    EXPECT_EQ(out.rsd_raw[t], 0.0f);
    EXPECT_EQ(rsd_prediction(out.rsd_raw[t], 5.0), 0.0);
    EXPECT_EQ(out.prog[t], 0.5f);
  }
}

TEST(Forward, SingleTaskHasNoProgress) {
  const auto net = random_net(VariantKind::kSingleTask, 4, 3, 2);
  std::mt19937_64 rng(0);
  const auto out = forward_sequence<float>(net, random_features(5, 4, 2), elapsed_of(5), Mode::kEval, rng);
  EXPECT_TRUE(out.prog.empty());
  auto n2 = net;
  EXPECT_EQ(n2.params().size(), 5u);
  auto n3 = random_net(VariantKind::kRsdNet, 4, 3, 2);
  EXPECT_EQ(n3.params().size(), 7u);
  EXPECT_EQ(n2.all_tensors().size(), 7u);
}

TEST(Forward, DimensionMismatch) {
  const auto net = random_net(VariantKind::kRsdNet, 4, 3, 2);
  std::mt19937_64 rng(0);
  EXPECT_THROW(forward_sequence<float>(net, random_features(5, 3, 2), elapsed_of(5), Mode::kEval, rng),
               DimensionError);
}

TEST(Forward, CausalTruncation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = random_net(VariantKind::kRsdNet, 6, 8, seed);
    const std::size_t n = 30;
    const auto x = random_features(n, 6, seed + 100);
    const auto el = elapsed_of(n);
    std::mt19937_64 rng(0);
    const auto full = forward_sequence<float>(net, x, el, Mode::kEval, rng);
    const std::size_t k = 1 + seed % (n - 1);
    const auto part = forward_sequence<float>(net, std::span<const float>(x).first(k * 6),
                                              std::span<const float>(el).first(k), Mode::kEval, rng);
    for (std::size_t t = 0; t < k; ++t) {
      ASSERT_EQ(part.rsd_raw[t], full.rsd_raw[t]);
      ASSERT_EQ(part.prog[t], full.prog[t]);
    }
    // Changing the future leaves the past untouched.
    auto x2 = x;
    for (std::size_t i = k * 6; i < x2.size(); ++i) x2[i] = -x2[i] + 3.0f;
    const auto alt = forward_sequence<float>(net, x2, el, Mode::kEval, rng);
    for (std::size_t t = 0; t < k; ++t) ASSERT_EQ(alt.rsd_raw[t], full.rsd_raw[t]);
  }
}

TEST(Forward, TrainModeUsesDropout) {
  const auto net = random_net(VariantKind::kRsdNet, 6, 8, 3);
  const auto x = random_features(10, 6, 3);
  std::mt19937_64 a(1), b(1), c(2);
  const auto o1 = forward_sequence<float>(net, x, elapsed_of(10), Mode::kTrain, a);
  const auto o2 = forward_sequence<float>(net, x, elapsed_of(10), Mode::kTrain, b);
  const auto o3 = forward_sequence<float>(net, x, elapsed_of(10), Mode::kTrain, c);
  EXPECT_EQ(o1.rsd_raw, o2.rsd_raw);
  EXPECT_NE(o1.rsd_raw, o3.rsd_raw);
}

// ---- loss ----

TEST(Loss, PerfectPredictionsAreZero) {
  RsdNet<double> net(VariantKind::kRsdNet, 2, 2, 5.0, 0.0);
  SequenceOutput<double> out{{2.0, 1.0, 0.0}, {1.0 / 3, 2.0 / 3, 1.0}, {}};
  const std::vector<double> rsd{10, 5, 0}, prog{1.0 / 3, 2.0 / 3, 1.0};
  const auto l = loss_multitask<double>(net, out, rsd, prog, nullptr, nullptr);
  EXPECT_EQ(l.total(), 0.0);
}

TEST(Loss, ErrorOfOneSNormPerFrame) {
  RsdNet<double> net(VariantKind::kRsdNet, 2, 2, 5.0, 0.0);
  const std::vector<double> rsd{10, 5, 0}, prog{0.25, 0.5, 1.0};
  SequenceOutput<double> out{{3.0, 2.0, 1.0}, {0.25, 0.5, 1.0}, {}};
  const auto l = loss_multitask<double>(net, out, rsd, prog, nullptr, nullptr);
  EXPECT_DOUBLE_EQ(l.rsd, 0.5);
  EXPECT_EQ(l.prog, 0.0);
}

TEST(Loss, EqualWeightsAndAdditivity) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 12;
    std::uniform_real_distribution<double> u(0.05, 0.95), r(0.0, 40.0);
    std::vector<double> rsd(n), prog(n), raw(n), p1(n), p2(n);
    for (std::size_t t = 0; t < n; ++t) {
      rsd[t] = r(rng);
      prog[t] = u(rng);
      raw[t] = r(rng) / 5.0;
      p1[t] = std::clamp(prog[t] + 0.1 * (u(rng) - 0.5), 0.0, 1.0);
      p2[t] = std::clamp(prog[t] + 2.0 * (p1[t] - prog[t]), 0.0, 1.0);
    }
    RsdNet<double> multi(VariantKind::kRsdNet, 2, 2, 5.0, 0.0), single(VariantKind::kSingleTask, 2, 2, 5.0, 0.0);
    const auto lm = loss_multitask<double>(multi, {raw, p1, {}}, rsd, prog, nullptr, nullptr);
    const auto ls = loss_multitask<double>(single, {raw, {}, {}}, rsd, prog, nullptr, nullptr);
    double standalone = 0.0;
    for (std::size_t t = 0; t < n; ++t) standalone += numkernel::smooth_l1(p1[t], prog[t]).loss;
    standalone /= static_cast<double>(n);
    EXPECT_DOUBLE_EQ(lm.total(), ls.total() + standalone);
    EXPECT_EQ(ls.prog, 0.0);
    // Doubling only the progress error moves L by exactly the progress delta.
    const auto lm2 = loss_multitask<double>(multi, {raw, p2, {}}, rsd, prog, nullptr, nullptr);
    EXPECT_EQ(lm2.rsd, lm.rsd);
    EXPECT_NEAR(lm2.total() - lm.total(), lm2.prog - lm.prog, 1e-14);
  }
}

// ---- gradients of the whole stack ----

class HeadStackGrad : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(HeadStackGrad, TwentyStepsHiddenEight) {
  for (auto kind : {VariantKind::kRsdNet, VariantKind::kSingleTask}) {
    auto f = test::head_stack_fragment<double>(kind, 6, 8, 20, GetParam());
    const auto r = numkernel::grad_check(f.fragment, 1e-4);
    EXPECT_LT(r.max_relative_error, 1e-4) << variant_name(kind) << " worst " << r.worst_param << "[" << r.worst_index
                                          << "] a=" << r.worst_analytic << " n=" << r.worst_numeric;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, HeadStackGrad, ::testing::Range<std::uint64_t>(0, 20));

TEST(HeadStackGrad, WithoutDropout) {
  auto f = test::head_stack_fragment<double>(VariantKind::kRsdNet, 5, 8, 20, 99, 0.0);
  EXPECT_LT(numkernel::grad_check(f.fragment, 1e-4).max_relative_error, 1e-4);
}

// ---- checkpoints ----

TEST(RsdNetCheckpoint, RoundTrip) {
  test::TempDir dir;
  auto net = random_net(VariantKind::kTimeLstm, 6, 5, 8);
  numkernel::write_checkpoint(dir / "l.rsdc", to_checkpoint(net, {{"config_hash", "h"}}));
  const auto ck = numkernel::read_checkpoint(dir / "l.rsdc");
  EXPECT_EQ(ck.metadata.at("kind"), "rsdlstm");
  EXPECT_EQ(ck.metadata.at("variant"), "timelstm");
  const auto back = rsdnet_from_checkpoint(ck);
  EXPECT_EQ(back.kind, VariantKind::kTimeLstm);
  EXPECT_EQ(back.s_norm, 5.0);
  const auto x = random_features(7, 6, 1);
  std::mt19937_64 rng(0);
  EXPECT_EQ(forward_sequence<float>(net, x, elapsed_of(7), Mode::kEval, rng).rsd_raw,
            forward_sequence<float>(back, x, elapsed_of(7), Mode::kEval, rng).rsd_raw);
  auto again = back;
  EXPECT_EQ(numkernel::serialize_checkpoint(to_checkpoint(again, {{"config_hash", "h"}})),
            read_file(dir / "l.rsdc"));
}

TEST(Variants, Names) {
  for (auto k : {VariantKind::kRsdNet, VariantKind::kSingleTask, VariantKind::kTimeLstm})
    EXPECT_EQ(parse_variant(variant_name(k)), k);
  EXPECT_THROW(parse_variant("bilstm"), ConfigError);
  EXPECT_TRUE(has_progress_head(VariantKind::kRsdNet));
  EXPECT_FALSE(has_progress_head(VariantKind::kTimeLstm));
}

// ---- traces ----

TEST(Traces, JsonlRoundTrip) {
  test::TempDir dir;
  std::vector<PredictionTrace> trs{{"a", {1, 2}, {1, 0}, {1.5, 0.25}, {0.5, 1.0}}, {"b", {1}, {0}, {0}, {}}};
  write_traces(dir / "t.jsonl", trs);
  const auto back = read_traces(dir / "t.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].rsd_pred, trs[0].rsd_pred);
  EXPECT_EQ(back[0].prog_pred, trs[0].prog_pred);
  EXPECT_FALSE(back[1].has_progress());
  const auto text = read_file(dir / "t.jsonl");
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  for (const char* k : {"surgery_id", "t", "elapsed_min", "rsd_true", "rsd_pred", "prog_pred"})
    EXPECT_TRUE(first.contains(k)) << k;
}

TEST(Traces, Validation) {
  test::TempDir dir;
  PredictionTrace neg{"a", {1}, {0}, {-0.5}, {}};
  EXPECT_THROW(neg.validate(), InputError);
  PredictionTrace ragged{"a", {1, 2}, {0}, {0}, {}};
  EXPECT_THROW(ragged.validate(), InputError);
  write_file_atomic(dir / "gap.jsonl",
                    "{\"surgery_id\":\"a\",\"t\":0,\"elapsed_min\":1,\"rsd_true\":1,\"rsd_pred\":1}\n"
                    "{\"surgery_id\":\"a\",\"t\":2,\"elapsed_min\":2,\"rsd_true\":0,\"rsd_pred\":0}\n");
  EXPECT_THROW(read_traces(dir / "gap.jsonl"), FormatError);
  EXPECT_THROW(read_traces(dir / "none.jsonl"), PipelineOrderError);
}

// ---- cells ----

TEST(Cells, ZeroParameterModelHasZeroCells) {
  RsdNet<float> net(VariantKind::kRsdNet, 4, 3, 5.0, 0.3);
  const auto r = test::toy_record("s", {3, 4});
  auto seq = synthsurg::derive_labels(r);
  const auto x = random_features(7, 4, 5);
  const auto d = dump_cell_activations(net, seq, x);
  ASSERT_EQ(d.cells.size(), 21u);
  for (double c : d.cells) EXPECT_EQ(c, 0.0);
  const auto csv = cells_to_csv(d);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,c_1,c_2,c_3,rsd_pred,prog_pred");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
}

TEST(Cells, MatchesPredictAndStatistics) {
  const auto net = random_net(VariantKind::kRsdNet, 4, 3, 6);
  const auto r = test::toy_record("s", {5, 6}, 30.0);
  const auto seq = synthsurg::derive_labels(r);
  const auto x = random_features(11, 4, 6);
  const auto d = dump_cell_activations(net, seq, x);
  const auto tr = predict_one(net, seq, x);
  EXPECT_EQ(d.trace.rsd_pred, tr.rsd_pred);
  EXPECT_EQ(d.trace.prog_pred, tr.prog_pred);

  // Hand-made dump: cell 0 rises with t, cell 1 steps inside the last phase.
  CellDump h;
  h.hidden = 2;
  h.trace.rsd_true.assign(10, 0.0);
  std::vector<bool> inside(10, false);
  for (std::size_t t = 0; t < 10; ++t) {
    h.cells.push_back(static_cast<double>(t * t));
    h.cells.push_back(t >= 7 ? 1.0 + 0.01 * static_cast<double>(t % 2) : 0.01 * static_cast<double>(t % 2));
    inside[t] = t >= 7;
  }
  const auto mono = monotonicity(h);
  EXPECT_DOUBLE_EQ(mono[0], 1.0);
  const auto sep = separation(h, inside);
  EXPECT_GT(sep[1], 2.0);
  std::vector<bool> tiny(10, false);
  tiny[0] = true;
  EXPECT_TRUE(std::isnan(separation(h, tiny)[0]));
}

TEST(Cells, SummaryPicksBestMedianIgnoringNan) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto s = summarize_cells({{0.1, 0.9, nan}, {0.2, 0.95, nan}, {0.3, 0.5, nan}});
  EXPECT_EQ(s.best_cell, 1u);
  EXPECT_DOUBLE_EQ(s.best_score, 0.9);
  EXPECT_TRUE(std::isnan(s.per_cell_median[2]));
  EXPECT_EQ(summarize_cells({{nan}}).best_score, -1.0);
}

// ---- training ----

namespace {

struct SmallSetup {
  synthsurg::Dataset ds;
  synthsurg::DatasetSplit split;
  encoder::FeatureSet feats;
};

SmallSetup small_setup() {
  SmallSetup s;
  auto spec = synthsurg::cholec_preset();
  spec.time_scale = 0.05;
  s.ds = synthsurg::generate_dataset(spec, 10, 5);
  const auto ids = s.ds.ids();
  s.split.t1_ids = {ids.begin(), ids.begin() + 4};
  s.split.t2_ids = {ids.begin() + 4, ids.begin() + 7};
  s.split.v_ids = {ids[7]};
  s.split.e_ids = {ids[8], ids[9]};
  s.feats = encoder::extract_dataset(encoder::random_encoder(32, {16}, 3), s.ds);
  return s;
}

}  // namespace

TEST(LstmTraining, DeterministicLossCurves) {
  const auto s = small_setup();
  LstmTrainConfig cfg;
  cfg.hidden = 8;
  cfg.iterations = 40;
  cfg.eval_every = 10;
  const auto a = train_variant(VariantKind::kRsdNet, s.ds, s.split, s.feats, cfg);
  const auto b = train_variant(VariantKind::kRsdNet, s.ds, s.split, s.feats, cfg);
  ASSERT_EQ(a.log.size(), 4u);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
    EXPECT_EQ(a.log[i].v_mae, b.log[i].v_mae);
  }
  auto na = a.net, nb = b.net;
  EXPECT_EQ(numkernel::serialize_checkpoint(to_checkpoint(na, {})),
            numkernel::serialize_checkpoint(to_checkpoint(nb, {})));
}

TEST(LstmTraining, PredictIsOrderedAndNonNegative) {
  const auto s = small_setup();
  const auto net = random_net(VariantKind::kRsdNet, 16, 8, 1);
  omp_set_num_threads(3);
  const auto trs = predict(net, s.ds, s.feats, s.split.e_ids);
  omp_set_num_threads(1);
  ASSERT_EQ(trs.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(trs[i].surgery_id, s.split.e_ids[i]);
    EXPECT_EQ(trs[i].size(), static_cast<std::size_t>(s.ds.at(s.split.e_ids[i]).frames.n_frames));
    for (double v : trs[i].rsd_pred) EXPECT_GE(v, 0.0);
    for (double p : trs[i].prog_pred) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
    const auto one = predict_one(net, s.ds.at(s.split.e_ids[i]).frames, s.feats.of(s.split.e_ids[i]));
    EXPECT_EQ(one.rsd_pred, trs[i].rsd_pred);
  }
}

TEST(LstmTraining, MissingFeaturesIsPipelineOrderError) {
  auto s = small_setup();
  s.feats.ids.pop_back();
  s.feats.features.pop_back();
  auto split = s.split;
  split.t2_ids.push_back(s.ds.ids().back());
  try {
    train_variant(VariantKind::kRsdNet, s.ds, split, s.feats, LstmTrainConfig{});
    FAIL() << "expected PipelineOrderError";
  } catch (const PipelineOrderError& e) {
    EXPECT_NE(std::string(e.what()).find("extract"), std::string::npos) << e.what();
  }
}

TEST(LstmTraining, ConfigValidation) {
  LstmTrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dropout_p = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = LstmTrainConfig{};
  c.s_norm = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(LstmTrainConfig::from_json(LstmTrainConfig{}.to_json()).to_json(), LstmTrainConfig{}.to_json());
}
