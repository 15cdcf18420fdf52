#include "stmeta/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include <boost/math/special_functions/beta.hpp>

#include "stmeta/errors.hpp"
#include "stmeta/numerics/ops.hpp"
#include "stmeta/numerics/optim.hpp"
#include "util/text.hpp"

namespace stmeta::train {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void mean_var(std::span<const double> x, double& mean, double& var) {
  mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  var = ss / static_cast<double>(x.size() - 1);
}

double mse(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return acc / static_cast<double>(a.size());
}

}  // namespace

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw PreconditionError("t-test needs at least two values per sample");
  double ma, va, mb, vb;
  mean_var(a, ma, va);
  mean_var(b, mb, vb);
  const double sa = va / static_cast<double>(a.size());
  const double sb = vb / static_cast<double>(b.size());
  const double se2 = sa + sb;
  TTestResult r;
  if (se2 == 0.0) {
    if (ma == mb) return {0.0, 1.0, static_cast<double>(a.size() + b.size() - 2)};
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    r.df = static_cast<double>(a.size() + b.size() - 2);
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (sa * sa / static_cast<double>(a.size() - 1) + sb * sb / static_cast<double>(b.size() - 1));
  const double x = r.df / (r.df + r.t * r.t);
  r.p = std::clamp(boost::math::ibeta(r.df / 2.0, 0.5, x), 0.0, 1.0);
  return r;
}

void EarlyStopConfig::validate() const {
  if (patience < 4 || patience % 2 != 0) {
    throw ConfigError("patience must be an even number ≥ 4, got " + std::to_string(patience));
  }
  if (!(p_threshold > 0.0 && p_threshold <= 1.0)) throw ConfigError("p_threshold must lie in (0, 1]");
  if (min_epochs != 0 && min_epochs < patience) throw ConfigError("min_epochs must be at least patience");
}

bool should_stop(std::span<const double> recent_val_losses, const EarlyStopConfig& cfg) {
  if (recent_val_losses.size() < cfg.patience) return false;
  const auto window = recent_val_losses.subspan(recent_val_losses.size() - cfg.patience);
  const std::size_t half = cfg.patience / 2;
  return welch_t_test(window.first(half), window.subspan(half)).p >= cfg.p_threshold;
}

EarlyStopper::EarlyStopper(EarlyStopConfig cfg) : cfg_(cfg) { cfg_.validate(); }

bool EarlyStopper::update(double val_loss) {
  history_.push_back(val_loss);
  if (history_.size() < cfg_.effective_min_epochs()) return false;
  const auto window = std::span<const double>(history_).subspan(history_.size() - cfg_.patience);
  const std::size_t half = cfg_.patience / 2;
  last_p_ = welch_t_test(window.first(half), window.subspan(half)).p;
  return last_p_ >= cfg_.p_threshold;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("ADAM betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("ADAM epsilon must be positive");
  stop.validate();
  if (max_epochs != 0 && max_epochs < 1) throw ConfigError("max_epochs must be positive");
}

std::string_view to_string(StopReason r) { return r == StopReason::t_test ? "t_test" : "max_epochs"; }

void write_history_csv(std::ostream& os, const TrainHistory& h) {
  os << "epoch,train_loss,val_loss,seconds\n";
  for (const auto& e : h.epochs) {
    os << e.epoch << ',' << util::format_double(e.train_loss) << ',' << util::format_double(e.val_loss) << ','
       << util::format_double(e.seconds) << '\n';
  }
}

std::vector<double> predict(const ForwardFn& forward, const timeseries::FactorSampleSet& samples, std::size_t chunk) {
  std::vector<double> out;
  out.reserve(samples.samples * samples.locations);
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < samples.samples; begin += chunk) {
    const std::size_t end = std::min(samples.samples, begin + chunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const auto pred = forward(samples.select(idx));
    out.insert(out.end(), pred.storage().begin(), pred.storage().end());
  }
  return out;
}

std::vector<double> predict(const models::STMetaModel& model, const timeseries::FactorSampleSet& samples,
                            std::size_t chunk) {
  return predict([&model](const timeseries::FactorSampleSet& b) { return model.forward(b); }, samples, chunk);
}

TrainHistory train_loop(models::ParamStore& params, const ForwardFn& forward, const timeseries::FactorSampleSet& train,
                        const timeseries::FactorSampleSet& val, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (train.samples == 0 || val.samples == 0) throw PreconditionError("training needs non-empty train and validation sets");

  const auto start = Clock::now();
  numerics::AdamState adam;
  adam.learning_rate = cfg.learning_rate;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.epsilon = cfg.epsilon;

  EarlyStopper stopper(cfg.stop);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(train.samples);
  std::iota(order.begin(), order.end(), 0);

  TrainHistory hist;
  hist.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<numerics::Tensor> best(params.tensors().begin(), params.tensors().end());
  const std::size_t max_epochs = cfg.effective_max_epochs();

  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const auto batch = train.select(std::span<const std::size_t>(order).subspan(begin, end - begin));
      const numerics::Tensor target = numerics::Tensor::matrix(batch.target.size(), 1, batch.target);

      numerics::Tape tape;
      numerics::Gradients grads;
      double batch_loss = 0.0;
      {
        numerics::TapeScope scope(tape);
        const numerics::Tensor loss = numerics::mse_loss(forward(batch), target);
        batch_loss = loss.item();
        if (!std::isfinite(batch_loss)) throw DivergenceError(static_cast<int>(epoch));
        grads = tape.backward(loss);
      }
      std::vector<numerics::Tensor> g;
      g.reserve(params.size());
      for (const auto& p : params.tensors()) g.push_back(grads.of(p));
      if (cfg.clip_norm > 0.0) numerics::clip_by_global_norm(g, cfg.clip_norm);
      numerics::adam_step(params.tensors(), g, adam);
      loss_sum += batch_loss * static_cast<double>(end - begin);
    }

    const auto pred = predict(forward, val);
    const double val_loss = mse(pred, val.target);
    if (!std::isfinite(val_loss)) throw DivergenceError(static_cast<int>(epoch));

    hist.epochs.push_back({epoch, loss_sum / static_cast<double>(train.samples), val_loss, seconds_since(t0)});
    if (val_loss < hist.best_val_loss) {
      hist.best_val_loss = val_loss;
      hist.best_epoch = epoch;
      best.assign(params.tensors().begin(), params.tensors().end());
    }
    hist.stop_epoch = epoch;
    if (stopper.update(val_loss)) {
      hist.stop_reason = StopReason::t_test;
      break;
    }
  }
  std::copy(best.begin(), best.end(), params.tensors().begin());
  hist.total_seconds = seconds_since(start);
  return hist;
}

TrainHistory train_loop(models::STMetaModel& model, const timeseries::FactorSampleSet& train,
                        const timeseries::FactorSampleSet& val, const TrainConfig& cfg, std::uint64_t seed) {
  return train_loop(
      model.params(), [&model](const timeseries::FactorSampleSet& b) { return model.forward(b); }, train, val, cfg,
      seed);
}

}  // namespace stmeta::train
