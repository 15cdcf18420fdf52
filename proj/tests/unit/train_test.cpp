#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "stmeta/errors.hpp"
#include "stmeta/models.hpp"
#include "stmeta/numerics/ops.hpp"
#include "stmeta/timeseries.hpp"
#include "stmeta/train.hpp"
#include "ttest_oracle.hpp"

namespace {

using namespace stmeta;
using train::EarlyStopConfig;
using train::welch_t_test;

using stmeta::testing::simpson_p_value;
using stmeta::testing::welch_reference;

TEST(WelchTTest, IdenticalHalves) {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const auto r = welch_t_test(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
}

TEST(WelchTTest, ConstantEqualSamplesDefinedLimit) {
  const std::vector<double> a{2.0, 2.0, 2.0};
  const auto r = welch_t_test(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
}

TEST(WelchTTest, ConstantDifferentSamples) {
  const std::vector<double> a{2.0, 2.0}, b{1.0, 1.0};
  const auto r = welch_t_test(a, b);
  EXPECT_TRUE(std::isinf(r.t));
  EXPECT_GT(r.t, 0.0);
  EXPECT_EQ(r.p, 0.0);
}

TEST(WelchTTest, HandExample) {
  const std::vector<double> a{5.0, 4.0}, b{3.0, 2.0};
  const auto r = welch_t_test(a, b);
  EXPECT_NEAR(r.t, 2.8284271247, 1e-9);
  EXPECT_NEAR(r.df, 2.0, 1e-12);
  // closed form for ν=2: p = 1 - |t|/sqrt(2 + t²)
  EXPECT_NEAR(r.p, 1.0 - r.t / std::sqrt(2.0 + r.t * r.t), 1e-12);
  EXPECT_NEAR(r.p, 0.106, 5e-4);
}

TEST(WelchTTest, SwapNegatesStatistic) {
  const std::vector<double> a{1.0, 3.0, 2.5, 4.0}, b{0.5, 0.7, 1.2};
  const auto ab = welch_t_test(a, b);
  const auto ba = welch_t_test(b, a);
  EXPECT_DOUBLE_EQ(ab.t, -ba.t);
  EXPECT_DOUBLE_EQ(ab.p, ba.p);
  EXPECT_DOUBLE_EQ(ab.df, ba.df);
}

TEST(WelchTTest, RejectsTinySamples) {
  const std::vector<double> a{1.0}, b{1.0, 2.0};
  EXPECT_THROW(welch_t_test(a, b), PreconditionError);
}

TEST(WelchTTest, MatchesNumericalIntegrationAcrossDf) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-1.5, 1.5);
  std::uniform_real_distribution<double> scale(0.2, 3.0);
  double lo_df = 1e9, hi_df = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t na = 2 + trial * 3, nb = 2 + (trial * 7) % 190;
    const double sa = scale(rng), sb = scale(rng), mu = shift(rng);
    std::vector<double> a(na), b(nb);
    for (auto& v : a) v = mu + sa * noise(rng);
    for (auto& v : b) v = sb * noise(rng);
    double t, df;
    welch_reference(a, b, t, df);
    const auto r = welch_t_test(a, b);
    ASSERT_NEAR(r.t, t, 1e-10 * std::max(1.0, std::abs(t)));
    ASSERT_NEAR(r.df, df, 1e-9 * df);
    ASSERT_NEAR(r.p, simpson_p_value(t, df), 1e-6) << "df=" << df << " t=" << t;
    lo_df = std::min(lo_df, df);
    hi_df = std::max(hi_df, df);
  }
  EXPECT_LT(lo_df, 2.0);
  EXPECT_GT(hi_df, 100.0);
}

TEST(WelchTTest, IntegrationOracleOnFixedDfGrid) {
  // mirrored samples have equal variances, so df = 2(n-1) exactly
  for (std::size_t n : {2u, 3u, 6u, 11u, 26u, 51u, 101u}) {
    std::vector<double> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = std::sin(0.7 * k) + 0.4;
      b[k] = -std::sin(0.7 * k);
    }
    const auto r = welch_t_test(a, b);
    EXPECT_NEAR(r.df, 2.0 * (n - 1), 1e-9 * n);
    EXPECT_NEAR(r.p, simpson_p_value(r.t, r.df), 1e-6) << "n=" << n;
  }
}

TEST(EarlyStop, ConfigValidation) {
  EXPECT_NO_THROW((EarlyStopConfig{4, 0.1, 0}.validate()));
  EXPECT_THROW((EarlyStopConfig{3, 0.1, 0}.validate()), ConfigError);
  EXPECT_THROW((EarlyStopConfig{5, 0.1, 0}.validate()), ConfigError);
  EXPECT_THROW((EarlyStopConfig{2, 0.1, 0}.validate()), ConfigError);
  EXPECT_THROW((EarlyStopConfig{4, 0.0, 0}.validate()), ConfigError);
  EXPECT_THROW((EarlyStopConfig{8, 0.1, 6}.validate()), ConfigError);
}

TEST(EarlyStop, ConstantLossesStopAtFirstCheck) {
  EarlyStopConfig cfg{10, 0.1, 0};
  train::EarlyStopper stopper(cfg);
  for (std::size_t e = 1; e < cfg.patience; ++e) EXPECT_FALSE(stopper.update(0.5)) << e;
  EXPECT_TRUE(stopper.update(0.5));
  EXPECT_EQ(stopper.epochs(), cfg.patience);
  EXPECT_EQ(stopper.last_p_value(), 1.0);
}

TEST(EarlyStop, NeverBeforePatience) {
  EarlyStopConfig cfg{20, 0.1, 0};
  const std::vector<double> losses(19, 1.0);
  EXPECT_FALSE(train::should_stop(losses, cfg));
  train::EarlyStopper stopper(cfg);
  for (double v : losses) EXPECT_FALSE(stopper.update(v));
}

TEST(EarlyStop, DecreasingRampContinues) {
  EarlyStopConfig cfg{40, 0.1, 0};
  train::EarlyStopper stopper(cfg);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (std::size_t e = 0; e < 3 * cfg.patience; ++e) {
    const double loss = 10.0 - 0.02 * static_cast<double>(e) + noise(rng);
    ASSERT_FALSE(stopper.update(loss)) << "stopped at epoch " << e + 1;
  }
}

TEST(EarlyStop, NoisyPlateauFixtureStopsAtFirstCheck) {
  EarlyStopConfig cfg{30, 0.1, 0};
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(1.0, 0.05);
  std::vector<double> stream(cfg.patience);
  for (auto& v : stream) v = noise(rng);

  const std::vector<double> a(stream.begin(), stream.begin() + 15), b(stream.begin() + 15, stream.end());
  double t, df;
  welch_reference(a, b, t, df);
  const double p_ref = simpson_p_value(t, df);
  ASSERT_GE(p_ref, cfg.p_threshold) << "fixture seed must produce an indistinguishable pair";

  train::EarlyStopper stopper(cfg);
  for (std::size_t e = 0; e + 1 < stream.size(); ++e) EXPECT_FALSE(stopper.update(stream[e]));
  EXPECT_TRUE(stopper.update(stream.back()));
  EXPECT_NEAR(stopper.last_p_value(), p_ref, 1e-6);
  EXPECT_TRUE(train::should_stop(stream, cfg));
}

TEST(EarlyStop, NoisyPlateauStopRate) {
  EarlyStopConfig cfg{20, 0.1, 0};
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, 1.0);
  int stops = 0;
  const int trials = 2000;
  std::vector<double> stream(cfg.patience);
  for (int k = 0; k < trials; ++k) {
    for (auto& v : stream) v = noise(rng);
    stops += train::should_stop(stream, cfg) ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(stops) / trials, 0.9, 0.03);
}

// ---- training loop ---------------------------------------------------------

timeseries::TrafficTensor sinusoid_tensor(std::size_t slots, std::size_t n) {
  std::vector<double> data(slots * n);
  for (std::size_t t = 0; t < slots; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      data[t * n + i] = 5.0 + 2.0 * std::sin(2.0 * std::numbers::pi * t / 24.0 + 0.9 * i);
    }
  }
  return timeseries::TrafficTensor::make(slots, n, std::move(data), 60, 0);
}

struct Fixture {
  timeseries::FactorSpec spec{6, 1, 0, 60};
  timeseries::FactorSampleSet train_set, val_set;
  double signal_std = 0.0;

  explicit Fixture(const timeseries::TrafficTensor& raw) {
    const auto sp = timeseries::split(raw);
    timeseries::Normalizer norm;
    norm.fit(raw, sp.train);
    const auto t = norm.apply(raw);
    train_set = timeseries::assemble_samples(t, spec, sp.train);
    val_set = timeseries::assemble_samples(t, spec, sp.val);
    double m = 0.0;
    for (double v : val_set.target) m += v;
    m /= val_set.target.size();
    for (double v : val_set.target) signal_std += (v - m) * (v - m);
    signal_std = std::sqrt(signal_std / val_set.target.size());
  }
};

models::STMetaConfig small_tmeta() {
  auto cfg = models::STMetaConfig::from_variant("TMeta-LSTM-GAL");
  cfg.hidden_units = 8;
  cfg.gal_units = 8;
  cfg.dense_units = 8;
  cfg.heads = 1;
  return cfg;
}

TEST(TrainLoop, ZeroLearningRateLeavesParameters) {
  Fixture fx(sinusoid_tensor(300, 2));
  models::STMetaModel model(small_tmeta(), fx.spec, {}, 2, 3);
  std::vector<std::vector<double>> before;
  for (const auto& p : model.params().tensors()) before.push_back(p.storage());

  train::TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 3;
  cfg.stop.patience = 4;
  const auto hist = train::train_loop(model, fx.train_set, fx.val_set, cfg, 1);
  ASSERT_EQ(hist.epochs.size(), 3u);
  EXPECT_EQ(hist.stop_reason, train::StopReason::max_epochs);
  for (std::size_t k = 0; k < before.size(); ++k) EXPECT_EQ(model.params().tensors()[k].storage(), before[k]);
  EXPECT_EQ(hist.epochs[0].val_loss, hist.epochs[2].val_loss);
}

TEST(TrainLoop, DeterministicForFixedSeed) {
  Fixture fx(sinusoid_tensor(300, 2));
  train::TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.max_epochs = 4;
  cfg.stop.patience = 4;
  auto run = [&] {
    models::STMetaModel model(small_tmeta(), fx.spec, {}, 2, 3);
    const auto hist = train::train_loop(model, fx.train_set, fx.val_set, cfg, 17);
    std::vector<double> flat;
    for (const auto& e : hist.epochs) {
      flat.push_back(e.train_loss);
      flat.push_back(e.val_loss);
    }
    for (const auto& p : model.params().tensors()) flat.insert(flat.end(), p.storage().begin(), p.storage().end());
    return flat;
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainLoop, ReturnsBestValidationParameters) {
  Fixture fx(sinusoid_tensor(300, 2));
  models::STMetaModel model(small_tmeta(), fx.spec, {}, 2, 3);
  train::TrainConfig cfg;
  cfg.learning_rate = 0.3;  // large steps make the validation curve non-monotone
  cfg.max_epochs = 8;
  cfg.stop.patience = 4;
  cfg.stop.min_epochs = 8;
  const auto hist = train::train_loop(model, fx.train_set, fx.val_set, cfg, 5);
  double best = hist.epochs[0].val_loss;
  std::size_t best_epoch = 1;
  for (const auto& e : hist.epochs) {
    if (e.val_loss < best) {
      best = e.val_loss;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(hist.best_epoch, best_epoch);
  EXPECT_EQ(hist.best_val_loss, best);
  const auto pred = train::predict(model, fx.val_set);
  double mse = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) mse += (pred[k] - fx.val_set.target[k]) * (pred[k] - fx.val_set.target[k]);
  EXPECT_NEAR(mse / pred.size(), best, 1e-12);
}

TEST(TrainLoop, DivergenceNamesEpoch) {
  Fixture fx(sinusoid_tensor(300, 2));
  models::STMetaModel model(small_tmeta(), fx.spec, {}, 2, 3);
  auto& params = model.params();
  const train::ForwardFn nan_forward = [&](const timeseries::FactorSampleSet& b) {
    const auto y = model.forward(b);
    return numerics::mul(y, numerics::Tensor::filled(y.shape(), std::nan("")));
  };
  train::TrainConfig cfg;
  cfg.stop.patience = 4;
  try {
    train::train_loop(params, nan_forward, fx.train_set, fx.val_set, cfg, 1);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
}

TEST(TrainLoop, HistoryCsv) {
  train::TrainHistory h;
  h.epochs.push_back({1, 0.5, 0.25, 0.125});
  std::ostringstream os;
  train::write_history_csv(os, h);
  EXPECT_EQ(os.str(), "epoch,train_loss,val_loss,seconds\n1,0.5,0.25,0.125\n");
}

TEST(TrainLoop, ConstantSeriesFitsQuickly) {
  std::vector<double> data(300 * 2, 3.0);
  for (std::size_t t = 0; t < 300; ++t) data[t * 2 + 1] = 7.0;
  const auto raw = timeseries::TrafficTensor::make(300, 2, std::move(data), 60, 0);
  timeseries::FactorSpec spec{6, 1, 0, 60};
  const auto sp = timeseries::split(raw);
  // raw values: z-scoring a constant column would make every target 0
  const auto tr = timeseries::assemble_samples(raw, spec, sp.train);
  const auto va = timeseries::assemble_samples(raw, spec, sp.val);
  models::STMetaModel model(small_tmeta(), spec, {}, 2, 3);
  train::TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.stop.patience = 10;
  cfg.max_epochs = 150;
  const auto hist = train::train_loop(model, tr, va, cfg, 2);
  EXPECT_LT(hist.best_val_loss, 1e-3);
}

TEST(TrainLoop, TMetaLearnsSinusoid) {
  Fixture fx(sinusoid_tensor(600, 2));
  models::STMetaModel model(small_tmeta(), fx.spec, {}, 2, 3);
  train::TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.stop.patience = 20;
  cfg.max_epochs = 300;
  const auto hist = train::train_loop(model, fx.train_set, fx.val_set, cfg, 4);
  EXPECT_LE(hist.stop_epoch, 300u);
  EXPECT_LT(std::sqrt(hist.best_val_loss), 0.15 * fx.signal_std);
}

}  // namespace
