#include <array>
#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "stmeta/bench.hpp"
#include "stmeta/models.hpp"
#include "stmeta/numerics/ops.hpp"
#include "stmeta/timeseries.hpp"
#include "stmeta/train.hpp"

namespace {

using namespace stmeta;
using numerics::Tensor;

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = n01(rng);
  return Tensor::matrix(rows, cols, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(numerics::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);

struct Fixture {
  bench::SynthDataset data;
  timeseries::FactorSpec factors{6, 1, 1, 60};
  timeseries::FactorSampleSet batch;

  Fixture() {
    bench::SynthSpec s;
    s.nodes = 20;
    s.slots = 1000;
    data = bench::synth_generate(s);
    const auto all = timeseries::assemble_samples(data.tensor, factors);
    std::vector<std::size_t> idx(32);
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    batch = all.select(idx);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

models::STMetaModel make_model(std::size_t variant) {
  const auto& f = fixture();
  auto cfg = models::STMetaConfig::from_variant(models::STMetaConfig::variant_names()[variant]);
  cfg.hidden_units = cfg.gal_units = cfg.dense_units = 16;
  return models::STMetaModel(cfg, f.factors, {f.data.planted}, f.data.tensor.locations, 1);
}

void BM_Forward(benchmark::State& state) {
  const auto model = make_model(static_cast<std::size_t>(state.range(0)));
  state.SetLabel(model.config().variant);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(fixture().batch));
}
BENCHMARK(BM_Forward)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  auto model = make_model(static_cast<std::size_t>(state.range(0)));
  state.SetLabel(model.config().variant);
  const auto& batch = fixture().batch;
  const auto target = Tensor::matrix(batch.target.size(), 1, batch.target);
  for (auto _ : state) {
    numerics::Tape tape;
    numerics::TapeScope scope(tape);
    const auto loss = numerics::mse_loss(model.forward(batch), target);
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_ForwardBackward)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_WelchTTest(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  std::vector<double> a(100), b(100);
  for (auto& x : a) x = n01(rng);
  for (auto& x : b) x = n01(rng);
  for (auto _ : state) benchmark::DoNotOptimize(train::welch_t_test(a, b));
}
BENCHMARK(BM_WelchTTest);

}  // namespace

BENCHMARK_MAIN();
