#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "stmeta/models.hpp"
#include "stmeta/timeseries.hpp"

namespace stmeta::train {

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

/// Welch's unequal-variance t-test, two-tailed. Both samples need ≥ 2 values.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct EarlyStopConfig {
  std::size_t patience = 200;
  double p_threshold = 0.1;
  std::size_t min_epochs = 0;  // 0 means `patience`

  void validate() const;
  std::size_t effective_min_epochs() const { return min_epochs ? min_epochs : patience; }
};

/// Splits the last `patience` losses into halves; stop iff p ≥ p_threshold.
bool should_stop(std::span<const double> recent_val_losses, const EarlyStopConfig& cfg);

/// Feeds one validation loss per epoch; checks every epoch once eligible.
class EarlyStopper {
 public:
  explicit EarlyStopper(EarlyStopConfig cfg);
  bool update(double val_loss);
  std::size_t epochs() const { return history_.size(); }
  double last_p_value() const { return last_p_; }

 private:
  EarlyStopConfig cfg_;
  std::vector<double> history_;
  double last_p_ = 1.0;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 0;  // 0 means 10·patience
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // ≤ 0 disables clipping
  EarlyStopConfig stop;

  void validate() const;
  std::size_t effective_max_epochs() const { return max_epochs ? max_epochs : 10 * stop.patience; }
};

enum class StopReason { t_test, max_epochs };

std::string_view to_string(StopReason r);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t stop_epoch = 0;
  StopReason stop_reason = StopReason::max_epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double total_seconds = 0.0;
};

/// CSV `epoch,train_loss,val_loss,seconds`.
void write_history_csv(std::ostream& os, const TrainHistory& h);

/// (S·n)×1 predictions of a batch built from the current parameter values.
using ForwardFn = std::function<numerics::Tensor(const timeseries::FactorSampleSet&)>;

/// Mini-batch ADAM on MSE. Parameters in `params` end at the best-validation epoch.
TrainHistory train_loop(models::ParamStore& params, const ForwardFn& forward, const timeseries::FactorSampleSet& train,
                        const timeseries::FactorSampleSet& val, const TrainConfig& cfg, std::uint64_t seed);
TrainHistory train_loop(models::STMetaModel& model, const timeseries::FactorSampleSet& train,
                        const timeseries::FactorSampleSet& val, const TrainConfig& cfg, std::uint64_t seed);

/// Forward pass in chunks without recording; returns S·n predictions.
std::vector<double> predict(const ForwardFn& forward, const timeseries::FactorSampleSet& samples,
                            std::size_t chunk = 256);
std::vector<double> predict(const models::STMetaModel& model, const timeseries::FactorSampleSet& samples,
                            std::size_t chunk = 256);

}  // namespace stmeta::train
