#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>
#include <omp.h>

#include "fragments.hpp"
#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"
#include "rsdkit/numkernel/checkpoint.hpp"
#include "rsdkit/numkernel/dropout.hpp"
#include "rsdkit/numkernel/kernels.hpp"
#include "rsdkit/numkernel/sgd.hpp"
#include "test_util.hpp"

using namespace rsdkit;
using namespace rsdkit::numkernel;
using rsdkit::test::fill_uniform;

namespace {

template <typename Real>
double check(rsdkit::test::OwnedFragment<Real>& f, double eps) {
  const auto r = grad_check(f.fragment, eps);
  EXPECT_GT(r.n_checked, 0u);
  return r.max_relative_error;
}

}  // namespace

// ---- linear ----

TEST(Linear, ZeroInputGivesZeroOutputAndZeroWeightGrad) {
  Tensor<double> x({3, 4}), w({4, 2}), b({2});
  w.enable_grad();
  b.enable_grad();
  std::mt19937_64 rng(1);
  fill_uniform(w, rng);
  const auto y = linear_forward(x, w, b);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
  Tensor<double> dy({3, 2});
  fill_uniform(dy, rng);
  linear_backward(x, w, b, dy);
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Linear, IdentityWeightsCopyInput) {
  Tensor<float> x({2, 3}), w({3, 3}), b({3});
  std::mt19937_64 rng(2);
  fill_uniform(x, rng);
  for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0f;
  const auto y = linear_forward(x, w, b);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Linear, ShapeMismatchNamesBothShapes) {
  Tensor<float> x({2, 3}), w({4, 2}), b({2});
  try {
    linear_forward(x, w, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Linear, GradCheckSeed7) {
  auto f32 = rsdkit::test::linear_fragment<float>(3, 4, 2, 7);
  EXPECT_LT(check(f32, 1e-2), 1e-3);
  auto f64 = rsdkit::test::linear_fragment<double>(3, 4, 2, 7);
  EXPECT_LT(check(f64, 1e-6), 1e-6);
}

// ---- lstm ----

TEST(Lstm, ZeroParamsZeroState) {
  LstmCellParams<double> p(3, 4);
  std::vector<double> x{0.3, -1.0, 2.0}, h(4, 0.0), c(4, 0.0);
  const auto r = lstm_cell_step<double>(p, x, h, c);
  for (double v : r.h) EXPECT_EQ(v, 0.0);
  for (double v : r.c) EXPECT_EQ(v, 0.0);
  // sigma(0) = 0.5 and tanh(0) = 0 in the cached gates.
  EXPECT_EQ(r.cache.gates[0], 0.5);
  EXPECT_EQ(r.cache.gates[2 * 4], 0.0);
}

TEST(Lstm, SaturatedForgetKeepsCell) {
  const std::size_t d = 3, h = 4;
  LstmCellParams<double> p(d, h);
  std::mt19937_64 rng(3);
  fill_uniform(p.w_input, rng, -0.1, 0.1);
  fill_uniform(p.w_hidden, rng, -0.1, 0.1);
  for (std::size_t j = 0; j < h; ++j) {
    p.bias[j] = -20.0;     // input gate closed
    p.bias[h + j] = 20.0;  // forget gate open
  }
  std::vector<double> x{0.5, -0.2, 0.1}, hp{0.1, 0.2, -0.3, 0.0}, cp{1.5, -0.7, 0.25, 3.0};
  const auto r = lstm_cell_step<double>(p, x, hp, cp);
  for (std::size_t j = 0; j < h; ++j) EXPECT_NEAR(r.c[j], cp[j], 1e-6);
}

TEST(Lstm, ShapeMismatchThrows) {
  LstmCellParams<double> p(3, 4);
  std::vector<double> x(2), h(4), c(4);
  EXPECT_THROW(lstm_cell_step<double>(p, x, h, c), DimensionError);
}

TEST(Lstm, ForgetBiasInitialisedToOne) {
  LstmCellParams<float> p(5, 6);
  std::mt19937_64 rng(4);
  p.init(rng);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(p.bias[6 + j], 1.0f);
  const float k = 1.0f / std::sqrt(5.0f);
  for (float v : p.w_input.values()) EXPECT_LE(std::abs(v), k);
}

TEST(Lstm, BpttTenStepsMatchesFiniteDifferences) {
  auto f = rsdkit::test::lstm_sequence_fragment<double>(3, 5, 10, 11);
  EXPECT_LT(check(f, 1e-5), 1e-5);
}

TEST(Lstm, SequenceMatchesRepeatedSteps) {
  const std::size_t d = 3, h = 4, steps = 6;
  LstmCellParams<double> p(d, h);
  std::mt19937_64 rng(5);
  p.init(rng);
  Tensor<double> x({steps, d});
  fill_uniform(x, rng);
  LstmSequenceCache<double> cache;
  lstm_forward_sequence(p, x.data(), steps, cache);
  std::vector<double> hp(h, 0.0), cp(h, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto r = lstm_cell_step<double>(p, x.row(t), hp, cp);
    for (std::size_t j = 0; j < h; ++j) {
      EXPECT_EQ(cache.h[t * h + j], r.h[j]);
      EXPECT_EQ(cache.c[t * h + j], r.c[j]);
    }
    hp = r.h;
    cp = r.c;
  }
}

// ---- losses ----

TEST(SmoothL1, Examples) {
  auto a = smooth_l1(0.0, 0.0);
  EXPECT_EQ(a.loss, 0.0);
  EXPECT_EQ(a.grad, 0.0);
  auto b = smooth_l1(1.5, 1.0);
  EXPECT_DOUBLE_EQ(b.loss, 0.125);
  EXPECT_DOUBLE_EQ(b.grad, 0.5);
  auto c = smooth_l1(2.0, 0.0);
  EXPECT_DOUBLE_EQ(c.loss, 1.5);
  EXPECT_DOUBLE_EQ(c.grad, 1.0);
  auto d = smooth_l1(-2.0, 0.0);
  EXPECT_DOUBLE_EQ(d.loss, 1.5);
  EXPECT_DOUBLE_EQ(d.grad, -1.0);
}

TEST(SmoothL1, ContinuousAtKink) {
  for (double s : {1.0, -1.0}) {
    const double quad = 0.5 * s * s;
    const double lin = std::abs(s) - 0.5;
    EXPECT_EQ(quad, 0.5);
    EXPECT_EQ(lin, 0.5);
    EXPECT_EQ(smooth_l1(s, 0.0).loss, 0.5);
    const double below = std::nextafter(s, 0.0);
    EXPECT_NEAR(smooth_l1(below, 0.0).loss, 0.5, 1e-15);
    EXPECT_NEAR(smooth_l1(below, 0.0).grad, smooth_l1(s, 0.0).grad, 1e-15);
  }
}

TEST(CrossEntropy, UniformLogits) {
  std::vector<double> logits(10, 0.7);
  EXPECT_NEAR(cross_entropy<double>(logits, 3).loss, std::log(10.0), 1e-12);
}

TEST(CrossEntropy, SaturatedTrueClass) {
  std::vector<double> logits(10, 0.0);
  logits[4] = 20.0;
  const auto ce = cross_entropy<double>(logits, 4);
  EXPECT_LT(ce.loss, 1e-6);
  double sum = 0.0;
  for (double g : ce.grad) sum += g;
  EXPECT_NEAR(sum, 0.0, 1e-12);
}

TEST(CrossEntropy, ClassOutOfRange) {
  std::vector<float> logits(5, 0.0f);
  EXPECT_THROW(cross_entropy<float>(logits, 5), IndexError);
  EXPECT_THROW(cross_entropy<float>(logits, -1), IndexError);
}

TEST(CrossEntropy, GradCheckK7) {
  auto f = rsdkit::test::cross_entropy_fragment<double>(7, 3);
  EXPECT_LT(check(f, 1e-6), 1e-5);
}

// ---- sgd ----

namespace {

struct Scalar {
  Tensor<double> w{{1}};
  Scalar() { w.enable_grad(); }
  std::vector<ParamRef<double>> refs() { return {{"w", &w}}; }
};

}  // namespace

TEST(Sgd, PlainStep) {
  Scalar s;
  SgdMomentum<double> opt({.lr0 = 0.1, .momentum = 0.0, .weight_decay = 0.0, .decay_factor = 10, .decay_every = 100});
  s.w.grad()[0] = 1.0;
  auto refs = s.refs();
  opt.step(refs, 0);
  EXPECT_DOUBLE_EQ(s.w[0], -0.1);
}

TEST(Sgd, TwoMomentumSteps) {
  Scalar s;
  SgdMomentum<double> opt({.lr0 = 0.1, .momentum = 0.9, .weight_decay = 0.0, .decay_factor = 10, .decay_every = 100});
  auto refs = s.refs();
  s.w.grad()[0] = 1.0;
  opt.step(refs, 0);
  s.w.grad()[0] = 1.0;
  opt.step(refs, 1);
  EXPECT_NEAR(s.w[0], -0.29, 1e-15);
}

TEST(Sgd, WeightDecayIsCoupled) {
  Scalar s;
  s.w[0] = 2.0;
  SgdMomentum<double> opt({.lr0 = 0.5, .momentum = 0.0, .weight_decay = 0.1, .decay_factor = 10, .decay_every = 100});
  auto refs = s.refs();
  s.w.grad()[0] = 0.0;
  opt.step(refs, 0);
  EXPECT_DOUBLE_EQ(s.w[0], 2.0 - 0.5 * 0.1 * 2.0);
}

TEST(Sgd, StepDecaySchedule) {
  SgdConfig cfg{.lr0 = 1e-3, .momentum = 0.9, .weight_decay = 0.0, .decay_factor = 10, .decay_every = 20000};
  EXPECT_DOUBLE_EQ(cfg.learning_rate(0), 1e-3);
  EXPECT_DOUBLE_EQ(cfg.learning_rate(19999), 1e-3);
  EXPECT_NEAR(cfg.learning_rate(20000), 1e-4, 1e-18);
  EXPECT_NEAR(cfg.learning_rate(40000), 1e-5, 1e-19);
}

TEST(Sgd, ScheduleIsPiecewiseConstantAndNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    SgdConfig cfg{.lr0 = 0.01 + static_cast<double>(rng() % 100) / 100.0,
                  .momentum = 0.9,
                  .weight_decay = 0.0,
                  .decay_factor = 1.0 + static_cast<double>(rng() % 20),
                  .decay_every = 1 + static_cast<std::int64_t>(rng() % 50)};
    double prev = cfg.learning_rate(0);
    EXPECT_EQ(prev, cfg.lr0);
    for (std::int64_t it = 1; it < 400; ++it) {
      const double lr = cfg.learning_rate(it);
      EXPECT_LE(lr, prev);
      if (it % cfg.decay_every != 0) {
        EXPECT_EQ(lr, prev);
      }
      prev = lr;
    }
  }
}

TEST(Sgd, InvalidConfig) {
  EXPECT_THROW((SgdConfig{.lr0 = 0.0}.validate()), ConfigError);
  EXPECT_THROW((SgdConfig{.lr0 = 0.1, .momentum = 1.0}.validate()), ConfigError);
  EXPECT_THROW((SgdConfig{.lr0 = 0.1, .momentum = 0.5, .weight_decay = 0, .decay_factor = 0.5}.validate()), ConfigError);
}

TEST(Sgd, NonFiniteGradientAborts) {
  Scalar s;
  SgdMomentum<double> opt({.lr0 = 0.1});
  auto refs = s.refs();
  s.w.grad()[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    opt.step(refs, 17);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("17"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'w'"), std::string::npos) << msg;
    EXPECT_EQ(e.exit_code(), ExitCode::kNumeric);
  }
}

TEST(Sgd, ConvexQuadraticDecreasesMonotonically) {
  // L = 0.5 sum a_i (w_i - t_i)^2
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor<double> w({8});
    w.enable_grad();
    fill_uniform(w, rng, -5, 5);
    const auto a = rsdkit::test::uniform_vector<double>(8, rng, 0.5, 2.0);
    const auto t = rsdkit::test::uniform_vector<double>(8, rng, -1, 1);
    auto loss = [&] {
      double l = 0;
      for (std::size_t i = 0; i < 8; ++i) l += 0.5 * a[i] * (w[i] - t[i]) * (w[i] - t[i]);
      return l;
    };
    SgdMomentum<double> opt({.lr0 = 0.1, .momentum = 0.0, .weight_decay = 0.0, .decay_factor = 1, .decay_every = 1000});
    std::vector<ParamRef<double>> refs{{"w", &w}};
    double prev = loss();
    for (int it = 0; it < 50; ++it) {
      for (std::size_t i = 0; i < 8; ++i) w.grad()[i] = a[i] * (w[i] - t[i]);
      opt.step(refs, it);
      const double l = loss();
      EXPECT_LT(l, prev + 1e-15);
      prev = l;
    }
  }
}

TEST(Sgd, ClipGlobalNorm) {
  Tensor<double> a({2}), b({1});
  a.enable_grad();
  b.enable_grad();
  a.grad()[0] = 3;
  a.grad()[1] = 0;
  b.grad()[0] = 4;
  std::vector<ParamRef<double>> refs{{"a", &a}, {"b", &b}};
  EXPECT_DOUBLE_EQ(clip_grad_norm<double>(refs, 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(clip_grad_norm<double>(refs, 0.0), 1.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
}

// ---- dropout ----

TEST(Dropout, ZeroProbabilityIsIdentity) {
  Tensor<float> x({100});
  std::mt19937_64 rng(1);
  fill_uniform(x, rng);
  for (Mode m : {Mode::kTrain, Mode::kEval}) {
    const auto y = dropout(x, 0.0, m, rng);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
  }
}

TEST(Dropout, EvalIsIdentity) {
  Tensor<float> x({100});
  std::mt19937_64 rng(2);
  fill_uniform(x, rng);
  const auto y = dropout(x, 0.3, Mode::kEval, rng);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Dropout, InvertedDropoutPreservesExpectation) {
  Tensor<double> x({100000}, 1.0);
  std::mt19937_64 rng(3);
  Tensor<double> mask;
  const auto y = dropout(x, 0.3, Mode::kTrain, rng, &mask);
  double sum = 0;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += y[i];
    if (y[i] == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(y[i], 1.0 / 0.7);
    }
    EXPECT_EQ(mask[i], y[i]);
  }
  EXPECT_NEAR(sum / 1e5, 1.0, 0.01);
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.3, 0.01);
}

// ---- grad check harness ----

TEST(GradCheck, ZeroFragmentHasZeroError) {
  // y = x W with x = 0 and W = 0: both the analytic and the numeric
  // gradients of x and W vanish exactly.
  auto f = rsdkit::test::linear_fragment<double>(2, 3, 2, 1);
  f.fragment.params.pop_back();
  for (auto& p : f.fragment.params) p.tensor->fill(0.0);
  const auto r = grad_check(f.fragment, 1e-6);
  EXPECT_EQ(r.max_relative_error, 0.0);
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_NEAR(relative_error(1e-9, 0.0), 0.1, 1e-15);
}

TEST(GradCheck, DetectsWrongGradient) {
  auto f = rsdkit::test::linear_fragment<double>(2, 3, 2, 1);
  auto backward = f.fragment.backward;
  auto* w = f.fragment.params[1].tensor;
  f.fragment.backward = [backward, w] {
    backward();
    w->grad()[0] += 0.1;
  };
  EXPECT_GT(grad_check(f.fragment, 1e-6).max_relative_error, 1e-3);
}

// Randomized shapes over many seeds, every layer at f64.
class GradProperty : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(GradProperty, AllLayersAgreeWithFiniteDifferences) {
  const std::uint64_t seed = GetParam();
  std::mt19937_64 rng(seed);
  auto dim = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
  auto lin = rsdkit::test::linear_fragment<double>(dim(1, 5), dim(1, 6), dim(1, 4), seed);
  EXPECT_LT(check(lin, 1e-5), 1e-5) << "linear";
  auto step = rsdkit::test::lstm_step_fragment<double>(dim(1, 5), dim(1, 6), seed);
  EXPECT_LT(check(step, 1e-5), 1e-5) << "lstm step";
  auto seq = rsdkit::test::lstm_sequence_fragment<double>(dim(1, 4), dim(1, 5), dim(2, 12), seed);
  EXPECT_LT(check(seq, 1e-5), 1e-5) << "lstm sequence";
  auto sl1 = rsdkit::test::smooth_l1_fragment<double>(dim(1, 20), seed);
  EXPECT_LT(check(sl1, 1e-5), 1e-5) << "smooth l1";
  auto ce = rsdkit::test::cross_entropy_fragment<double>(dim(2, 12), seed);
  EXPECT_LT(check(ce, 1e-5), 1e-5) << "cross entropy";
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradProperty, ::testing::Range<std::uint64_t>(100, 124));

// ---- kernels ----

TEST(Kernels, ParallelMatchesReferenceBitForBit) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t m = 1 + rng() % 90, k = 1 + rng() % 70, n = 1 + rng() % 80;
    const auto a = rsdkit::test::uniform_vector<float>(m * k, rng);
    const auto b = rsdkit::test::uniform_vector<float>(k * n, rng);
    const auto at = rsdkit::test::uniform_vector<float>(k * m, rng);
    const auto bt = rsdkit::test::uniform_vector<float>(n * k, rng);
    const auto c0 = rsdkit::test::uniform_vector<float>(m * n, rng);
    for (int threads : {1, 3}) {
      omp_set_num_threads(threads);
      for (bool acc : {false, true}) {
        auto c_ref = c0, c_par = c0;
        reference::gemm_nn(m, k, n, a.data(), b.data(), c_ref.data(), acc);
        gemm_nn(m, k, n, a.data(), b.data(), c_par.data(), acc);
        EXPECT_EQ(c_ref, c_par) << "nn " << m << "x" << k << "x" << n;
        c_ref = c0;
        c_par = c0;
        reference::gemm_nt(m, k, n, a.data(), bt.data(), c_ref.data(), acc);
        gemm_nt(m, k, n, a.data(), bt.data(), c_par.data(), acc);
        EXPECT_EQ(c_ref, c_par) << "nt";
      }
      auto c_ref = c0, c_par = c0;
      reference::gemm_tn(m, k, n, at.data(), b.data(), c_ref.data());
      gemm_tn(m, k, n, at.data(), b.data(), c_par.data());
      EXPECT_EQ(c_ref, c_par) << "tn";
    }
  }
  omp_set_num_threads(1);
}

// ---- checkpoint ----

TEST(Checkpoint, RoundTripIsBitExact) {
  rsdkit::test::TempDir dir;
  Checkpoint ck;
  ck.metadata = {{"kind", "test"}, {"iteration", 42}, {"config_hash", "abc"}};
  std::mt19937_64 rng(9);
  for (const auto& [name, shape] : std::vector<std::pair<std::string, std::vector<std::size_t>>>{
           {"a", {3, 4}}, {"b", {7}}, {"c", {2, 2, 2}}}) {
    Tensor<float> t(shape);
    fill_uniform(t, rng, -1e3, 1e3);
    ck.tensors.push_back({name, t});
  }
  ck.tensors[1].tensor[0] = -0.0f;
  ck.tensors[1].tensor[1] = std::numeric_limits<float>::denorm_min();
  write_checkpoint(dir / "x.rsdc", ck);
  const auto back = read_checkpoint(dir / "x.rsdc");
  EXPECT_EQ(back.metadata, ck.metadata);
  ASSERT_EQ(back.tensors.size(), ck.tensors.size());
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    EXPECT_EQ(back.tensors[i].name, ck.tensors[i].name);
    EXPECT_EQ(back.tensors[i].tensor.shape(), ck.tensors[i].tensor.shape());
    EXPECT_EQ(std::memcmp(back.tensors[i].tensor.data(), ck.tensors[i].tensor.data(),
                          ck.tensors[i].tensor.size() * sizeof(float)),
              0);
  }
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ck));
  EXPECT_EQ(read_file(dir / "x.rsdc"), serialize_checkpoint(ck));
}

TEST(Checkpoint, RejectsWrongMagicAndTruncation) {
  rsdkit::test::TempDir dir;
  Checkpoint ck;
  ck.tensors.push_back({"w", Tensor<float>({4}, 1.0f)});
  auto bytes = serialize_checkpoint(ck);
  write_file_atomic(dir / "trunc.rsdc", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_checkpoint(dir / "trunc.rsdc"), Error);
  bytes[0] = 'X';
  write_file_atomic(dir / "magic.rsdc", bytes);
  EXPECT_THROW(read_checkpoint(dir / "magic.rsdc"), FormatError);
  EXPECT_THROW(read_checkpoint(dir / "missing.rsdc"), PipelineOrderError);
}

TEST(Checkpoint, RestoreChecksShapes) {
  Checkpoint ck;
  ck.tensors.push_back({"w", Tensor<float>({2, 3}, 0.5f)});
  Tensor<double> w({2, 3});
  restore<double>(ck, {{"w", &w}});
  for (double v : w.values()) EXPECT_EQ(v, 0.5);
  Tensor<double> bad({3, 2});
  EXPECT_THROW(restore<double>(ck, {{"w", &bad}}), CheckpointError);
  EXPECT_THROW(restore<double>(ck, {{"missing", &w}}), CheckpointError);
}
