#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include <omp.h>

#include <gtest/gtest.h>

#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"
#include "rsdkit/common/stats.hpp"
#include "rsdkit/synthsurg/dataset.hpp"
#include "rsdkit/synthsurg/dataset_io.hpp"
#include "rsdkit/synthsurg/splits.hpp"
#include "test_util.hpp"

using namespace rsdkit;
using namespace rsdkit::synthsurg;

namespace {

std::vector<double> durations(const Dataset& ds) {
  std::vector<double> out;
  for (const auto& s : ds.surgeries) out.push_back(s.record.total_duration_T);
  return out;
}

const Dataset& cholec120() {
  static const Dataset ds = [] {
    auto spec = cholec_preset();
    spec.time_scale = 0.2;
    return generate_dataset(spec, 120, 42);
  }();
  return ds;
}

double ulp(double x) { return std::nextafter(std::abs(x), INFINITY) - std::abs(x); }

}  // namespace

// ---- workflow spec ----

TEST(WorkflowSpec, PresetsValidate) {
  EXPECT_NO_THROW(cholec_preset().validate());
  EXPECT_NO_THROW(bypass_preset().validate());
  EXPECT_EQ(cholec_preset().n_phases, 7);
  EXPECT_EQ(cholec_preset().n_tools(), 8);
  EXPECT_EQ(cholec_preset().feature_dim, 32);
  EXPECT_THROW(preset("hernia"), ConfigError);
  EXPECT_EQ(default_s_norm("cholec"), 5.0);
  EXPECT_EQ(default_s_norm("bypass"), 10.0);
}

TEST(WorkflowSpec, ViolationsNameTheInvariant) {
  auto expect_msg = [](WorkflowSpec s, const std::string& needle) {
    try {
      s.validate();
      ADD_FAILURE() << "no error for " << needle;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  auto s = cholec_preset();
  s.n_phases = 1;
  expect_msg(s, "n_phases >= 2");
  s = cholec_preset();
  s.feature_dim = 10;
  expect_msg(s, "feature_dim");
  s = cholec_preset();
  s.skip_probs.front() = 0.1;
  expect_msg(s, "first phase");
  s = cholec_preset();
  s.skip_probs.back() = 0.1;
  expect_msg(s, "final phase");
  s = cholec_preset();
  s.skip_probs[2] = 1.0;
  expect_msg(s, "skip_prob");
  s = cholec_preset();
  s.phase_duration[1].sigma = -0.1;
  expect_msg(s, "sigma >= 0");
  s = cholec_preset();
  s.noise_sigma = -1;
  expect_msg(s, "noise_sigma");
}

TEST(WorkflowSpec, JsonRoundTrip) {
  const auto s = bypass_preset();
  EXPECT_EQ(WorkflowSpec::from_json(s.to_json()).to_json(), s.to_json());
}

// ---- labels ----

TEST(Labels, Midpoint) {
  const auto r = test::toy_record("x", {600}, 1.0);
  const auto f = derive_labels(r);
  EXPECT_DOUBLE_EQ(f.progress[299], 0.5);
  EXPECT_DOUBLE_EQ(f.elapsed_min[299], 5.0);
  EXPECT_DOUBLE_EQ(f.rsd_min[299], 5.0);
}

TEST(Labels, LastFrame) {
  const auto r = test::toy_record("x", {250, 350}, 1.0);
  const auto f = derive_labels(r);
  EXPECT_EQ(f.progress.back(), 1.0);
  EXPECT_EQ(f.rsd_min.back(), 0.0);
  EXPECT_EQ(f.phase_id.front(), 0);
  EXPECT_EQ(f.phase_id.back(), 1);
}

TEST(Labels, FirstFrameClosedForm) {
  const auto r = test::toy_record("x", {600}, 1.0);
  const auto f = derive_labels(r);
  EXPECT_DOUBLE_EQ(f.progress[0], 1.0 / 600.0);
  EXPECT_DOUBLE_EQ(f.rsd_min[0], 10.0 - 1.0 / 60.0);
}

TEST(Labels, RecordValidation) {
  auto r = test::toy_record("x", {3, 4});
  EXPECT_NO_THROW(r.validate());
  r.segments[1].start_frame = 4;
  EXPECT_THROW(r.validate(), InputError);
  r = test::toy_record("x", {3, 4});
  r.segments[1].phase_id = 0;
  EXPECT_THROW(r.validate(), InputError);
  r = test::toy_record("x", {3, 4});
  r.total_frames = 8;
  EXPECT_THROW(r.validate(), InputError);
}

// ---- generator ----

TEST(Generate, DeterministicForFixedSeed) {
  const auto spec = cholec_preset();
  const auto a = generate_dataset(spec, 1, 0);
  const auto b = generate_dataset(spec, 1, 0);
  EXPECT_EQ(serialize_dataset(a), serialize_dataset(b));
  const auto c = generate_dataset(spec, 1, 1);
  EXPECT_NE(serialize_dataset(a), serialize_dataset(c));
}

TEST(Generate, IndependentOfThreadCount) {
  auto spec = bypass_preset();
  spec.time_scale = 0.1;
  omp_set_num_threads(1);
  const auto a = serialize_dataset(generate_dataset(spec, 12, 5));
  omp_set_num_threads(4);
  const auto b = serialize_dataset(generate_dataset(spec, 12, 5));
  omp_set_num_threads(1);
  EXPECT_EQ(a, b);
}

TEST(Generate, RejectsBadArguments) {
  EXPECT_THROW(generate_dataset(cholec_preset(), 0, 1), ConfigError);
  auto s = cholec_preset();
  s.n_phases = 1;
  EXPECT_THROW(generate_dataset(s, 3, 1), ConfigError);
}

TEST(Generate, CholecCalibration) {
  const auto d = durations(cholec120());
  const double mean = stats::mean(d);
  EXPECT_NEAR(mean, 38.1, 0.15 * 38.1);
  const double q1 = stats::quantile(d, 0.25), med = stats::quantile(d, 0.5), q3 = stats::quantile(d, 0.75);
  EXPECT_LT(q1, med);
  EXPECT_LT(med, q3);
  EXPECT_GT(mean, med) << "durations should be right-skewed";
}

TEST(Generate, BypassCalibration) {
  auto spec = bypass_preset();
  spec.time_scale = 0.2;
  const auto d = durations(generate_dataset(spec, 170, 42));
  EXPECT_NEAR(stats::mean(d), 115.0, 0.15 * 115.0);
  EXPECT_GT(stats::mean(d), stats::quantile(d, 0.5));
}

TEST(Generate, TimeScaleKeepsSimulatedMinutes) {
  auto spec = cholec_preset();
  const auto full = generate_dataset(spec, 20, 3);
  spec.time_scale = 0.2;
  const auto fast = generate_dataset(spec, 20, 3);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& a = full.surgeries[i].record;
    const auto& b = fast.surgeries[i].record;
    EXPECT_NEAR(b.total_frames, a.total_frames * 0.2, a.segments.size());
    EXPECT_NEAR(b.total_duration_T, a.total_duration_T, a.segments.size() * 5.0 / 60.0);
    EXPECT_DOUBLE_EQ(b.seconds_per_frame, 5.0);
  }
}

TEST(Generate, ZeroNoiseStructure) {
  auto spec = cholec_preset();
  spec.noise_sigma = 0.0;
  spec.style_sigma = 0.0;
  std::fill(spec.skip_probs.begin(), spec.skip_probs.end(), 0.0);
  for (auto& p : spec.phase_duration) p.sigma = 0.0;
  spec.time_scale = 0.2;
  const auto ds = generate_dataset(spec, 6, 9);
  const auto& ref = ds.surgeries.front();
  for (const auto& s : ds.surgeries) {
    EXPECT_EQ(s.record.segments, ref.record.segments);
    const int d = spec.feature_dim;
    for (std::int64_t t = 0; t < s.frames.n_frames; ++t) {
      const int m = s.frames.phase_id[static_cast<std::size_t>(t)];
      const float* row = s.frames.frame(t);
      for (int k = 0; k < d; ++k) {
        const bool tool = k >= spec.n_phases && k < spec.n_phases + spec.n_tools();
        if (tool) {
          EXPECT_TRUE(row[k] == 0.0f || row[k] == 1.0f);
        } else if (k == m) {
          EXPECT_EQ(row[k], 1.0f);
        } else if (k == spec.cue_channel()) {
          EXPECT_EQ(row[k], m == spec.end_signal_phase ? 1.0f : 0.0f);
        } else {
          EXPECT_EQ(row[k], 0.0f);
        }
      }
    }
  }
  // Redrawing with sigma > 0 but the same seed gives the same segments.
  auto noisy = cholec_preset();
  noisy.time_scale = 0.2;
  EXPECT_EQ(generate_dataset(noisy, 4, 9).surgeries[2].record.segments,
            generate_dataset(noisy, 4, 9).surgeries[2].record.segments);
}

TEST(Generate, RecordsAreValidAndLinear) {
  for (const auto& s : cholec120().surgeries) {
    EXPECT_NO_THROW(s.record.validate());
    EXPECT_EQ(s.record.segments.front().phase_id, 0);
    EXPECT_EQ(s.record.segments.back().phase_id, 6);
    EXPECT_DOUBLE_EQ(s.record.total_duration_T,
                     static_cast<double>(s.record.total_frames) * s.record.seconds_per_frame / 60.0);
    EXPECT_LE(s.record.total_duration_T, cholec_preset().max_duration_min);
  }
}

TEST(Generate, LabelIdentitiesEveryFrame) {
  auto spec = bypass_preset();
  spec.time_scale = 0.2;
  const auto bypass = generate_dataset(spec, 30, 4);
  for (const auto* ds : {&cholec120(), &bypass}) {
    for (const auto& s : ds->surgeries) {
      const double T = s.record.total_duration_T;
      const auto& f = s.frames;
      for (std::size_t t = 0; t < f.progress.size(); ++t) {
        EXPECT_LE(std::abs(f.rsd_min[t] + f.elapsed_min[t] - T), ulp(T));
        // Labels against the exact closed form (n - t - 1) * spf / 60.
        const long double exact = static_cast<long double>(s.record.total_frames - static_cast<std::int64_t>(t) - 1) *
                                  s.record.seconds_per_frame / 60.0L;
        EXPECT_LE(std::abs(static_cast<long double>(f.rsd_min[t]) - exact), ulp(T));
        // elapsed and progress are each rounded once, so the ratio form can
        // land up to two ulps of T away from the stored rsd.
        const double derived = f.elapsed_min[t] / f.progress[t] - f.elapsed_min[t];
        EXPECT_LE(std::abs(derived - f.rsd_min[t]), 2 * ulp(T)) << s.record.surgery_id << " t=" << t;
        if (t > 0) {
          EXPECT_LE(f.rsd_min[t], f.rsd_min[t - 1]);
          EXPECT_GE(f.progress[t], f.progress[t - 1]);
        }
      }
      EXPECT_EQ(f.rsd_min.back(), 0.0);
      EXPECT_EQ(f.progress.back(), 1.0);
    }
  }
}

TEST(Generate, CueChannelOnlyInEndSignalPhase) {
  const auto& ds = cholec120();
  const int cue = ds.spec.cue_channel();
  for (const auto& s : ds.surgeries)
    for (std::int64_t t = 0; t < s.frames.n_frames; ++t) {
      const bool inside = s.frames.phase_id[static_cast<std::size_t>(t)] == ds.spec.end_signal_phase;
      EXPECT_EQ(s.frames.frame(t)[cue], inside ? 1.0f : 0.0f);
    }
}

// ---- dataset file ----

TEST(DatasetIo, RoundTripAndByteIdenticalRegeneration) {
  test::TempDir dir;
  auto spec = cholec_preset();
  spec.time_scale = 0.2;
  const auto ds = generate_dataset(spec, 5, 11);
  write_dataset(dir / "a.rsds", ds);
  write_dataset(dir / "b.rsds", generate_dataset(spec, 5, 11));
  EXPECT_EQ(read_file(dir / "a.rsds"), read_file(dir / "b.rsds"));
  const auto back = read_dataset(dir / "a.rsds");
  EXPECT_EQ(back.seed, ds.seed);
  EXPECT_EQ(back.spec.to_json(), ds.spec.to_json());
  ASSERT_EQ(back.surgeries.size(), ds.surgeries.size());
  for (std::size_t i = 0; i < ds.surgeries.size(); ++i) {
    EXPECT_EQ(back.surgeries[i].record.segments, ds.surgeries[i].record.segments);
    EXPECT_EQ(back.surgeries[i].frames.features, ds.surgeries[i].frames.features);
    EXPECT_EQ(back.surgeries[i].frames.rsd_min, ds.surgeries[i].frames.rsd_min);
    EXPECT_EQ(back.surgeries[i].frames.progress, ds.surgeries[i].frames.progress);
  }
  EXPECT_EQ(serialize_dataset(back), serialize_dataset(ds));
  const auto bytes = read_file(dir / "a.rsds");
  EXPECT_EQ(bytes.substr(0, 4), "RSDS");
  EXPECT_EQ(get_u16(bytes.data() + 4), kDatasetVersion);
}

TEST(DatasetIo, MissingFileIsPipelineOrderError) {
  test::TempDir dir;
  EXPECT_THROW(read_dataset(dir / "nope.rsds"), PipelineOrderError);
}

TEST(DatasetIo, TamperedLabelsAreRejected) {
  test::TempDir dir;
  auto spec = cholec_preset();
  spec.time_scale = 0.1;
  auto bytes = serialize_dataset(generate_dataset(spec, 1, 2));
  // The final f32 of the payload is the last frame's phase id label.
  float v;
  std::memcpy(&v, bytes.data() + bytes.size() - 4, 4);
  v += 1.0f;
  std::memcpy(bytes.data() + bytes.size() - 4, &v, 4);
  write_file_atomic(dir / "bad.rsds", bytes);
  EXPECT_THROW(read_dataset(dir / "bad.rsds"), FormatError);
}

TEST(DatasetIo, CsvAndJsonlExports) {
  test::TempDir dir;
  const auto ds = test::toy_dataset(test::toy_spec(2), {test::toy_record("a", {2, 1}), test::toy_record("b", {1, 1})});
  export_csv(dir / "x.csv", ds);
  export_jsonl(dir / "x.jsonl", ds);
  const auto csv = read_file(dir / "x.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 5);
  EXPECT_EQ(csv.substr(0, csv.find(',')), "surgery_id");
  const auto jl = read_file(dir / "x.jsonl");
  EXPECT_EQ(std::count(jl.begin(), jl.end(), '\n'), 5);
  const auto first = nlohmann::json::parse(jl.substr(0, jl.find('\n')));
  EXPECT_EQ(first.at("surgery_id"), "a");
  EXPECT_DOUBLE_EQ(first.at("rsd_min").get<double>(), 2.0);
}

// ---- splits ----

TEST(Splits, RatiosParse) {
  const auto r = SplitRatios::parse("1/3,1/3,1/12,1/4");
  EXPECT_DOUBLE_EQ(r.t1, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.v, 1.0 / 12.0);
  EXPECT_NO_THROW(r.validate());
  EXPECT_THROW(SplitRatios::parse("0.5,0.5,0.5,0.5").validate(), ConfigError);
  EXPECT_THROW(SplitRatios::parse("1,2,3"), ConfigError);
  EXPECT_THROW(SplitRatios::parse("a,b,c,d"), ConfigError);
}

TEST(Splits, Apportion) {
  EXPECT_EQ(apportion(120, {1.0 / 3, 1.0 / 3, 1.0 / 12, 0.25}), (std::vector<int>{40, 40, 10, 30}));
  EXPECT_EQ(apportion(10, {0.5, 0.25, 0.25}), (std::vector<int>{5, 3, 2}));
  const auto a = apportion(7, {0.3, 0.3, 0.4});
  EXPECT_EQ(a[0] + a[1] + a[2], 7);
}

TEST(Splits, FourFoldCholecSizesAndPartition) {
  const auto& ds = cholec120();
  const auto folds = make_splits(ds, SplitRatios{}, 4, 7);
  ASSERT_EQ(folds.size(), 4u);
  std::multiset<std::string> all_e;
  for (const auto& f : folds) {
    EXPECT_EQ(f.t1_ids.size(), 40u);
    EXPECT_EQ(f.t2_ids.size(), 40u);
    EXPECT_EQ(f.v_ids.size(), 10u);
    EXPECT_EQ(f.e_ids.size(), 30u);
    std::set<std::string> u;
    for (const auto* v : {&f.t1_ids, &f.t2_ids, &f.v_ids, &f.e_ids}) u.insert(v->begin(), v->end());
    EXPECT_EQ(u.size(), 120u) << "subsets must be disjoint and cover the dataset";
    all_e.insert(f.e_ids.begin(), f.e_ids.end());
    for (const auto* v : {&f.t1_ids, &f.t2_ids, &f.v_ids, &f.e_ids}) EXPECT_TRUE(quartiles_similar(ds, *v));
  }
  EXPECT_EQ(all_e.size(), 120u);
  EXPECT_EQ(std::set<std::string>(all_e.begin(), all_e.end()).size(), 120u);
}

TEST(Splits, QuartilesWithinTolerance) {
  const auto& ds = cholec120();
  const auto d = durations(ds);
  const double q1 = stats::quantile(d, 0.25), q3 = stats::quantile(d, 0.75);
  for (const auto& f : make_splits(ds, SplitRatios{}, 4, 7))
    for (const auto* ids : {&f.t1_ids, &f.t2_ids, &f.v_ids, &f.e_ids}) {
      std::vector<double> sub;
      for (const auto& id : *ids) sub.push_back(ds.at(id).record.total_duration_T);
      EXPECT_LE(std::abs(stats::quantile(sub, 0.25) - q1), kQuartileTolerance * q1);
      EXPECT_LE(std::abs(stats::quantile(sub, 0.75) - q3), kQuartileTolerance * q3);
    }
}

TEST(Splits, SingleFoldDeterministic) {
  const auto& ds = cholec120();
  const auto a = make_splits(ds, SplitRatios{}, 1, 3);
  const auto b = make_splits(ds, SplitRatios{}, 1, 3);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].to_json(), b[0].to_json());
  EXPECT_NE(a[0].to_json(), make_splits(ds, SplitRatios{}, 1, 4)[0].to_json());
}

TEST(Splits, InfeasibleStratification) {
  const auto ds = test::toy_durations({10, 20, 30, 40, 50, 60, 70, 80});
  EXPECT_THROW(make_splits(ds, SplitRatios{}, 4, 1), SplitError);
  EXPECT_THROW(make_splits(cholec120(), SplitRatios{}, 5, 1), ConfigError);
  EXPECT_THROW(make_splits(cholec120(), SplitRatios{}, 0, 1), ConfigError);
}

TEST(Splits, FileRoundTripAndFoldNames) {
  test::TempDir dir;
  const auto folds = make_splits(cholec120(), SplitRatios{}, 4, 7);
  write_splits(dir / "s.json", folds);
  const auto back = read_splits(dir / "s.json");
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(back[k].to_json(), folds[k].to_json());
  EXPECT_THROW(read_splits(dir / "none.json"), PipelineOrderError);
  EXPECT_EQ(parse_fold("fold3"), 3);
  EXPECT_EQ(parse_fold("2"), 2);
  EXPECT_THROW(parse_fold("fold"), ConfigError);
}

TEST(Splits, CnnTrainSize) {
  const auto& ds = cholec120();
  const auto base = make_splits(ds, SplitRatios{}, 1, 7)[0];
  for (int n : {20, 40, 60}) {
    const auto s = with_cnn_train_size(ds, base, n, 7);
    EXPECT_EQ(s.t1_ids.size(), static_cast<std::size_t>(n));
    EXPECT_EQ(s.t1_ids.size() + s.t2_ids.size(), base.t1_ids.size() + base.t2_ids.size());
    EXPECT_EQ(s.v_ids, base.v_ids);
    EXPECT_EQ(s.e_ids, base.e_ids);
  }
}
