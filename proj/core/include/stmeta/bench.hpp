#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stmeta/errors.hpp"
#include "stmeta/graphkit.hpp"
#include "stmeta/ingest.hpp"
#include "stmeta/models.hpp"
#include "stmeta/timeseries.hpp"
#include "stmeta/train.hpp"

namespace stmeta::bench {

// ---- metrics ---------------------------------------------------------------

/// Every dataset column of an RMSE matrix needs a best value above this.
inline constexpr double kNrmseEpsilon = 1e-12;

class DegenerateColumnError : public ValidationError {
 public:
  explicit DegenerateColumnError(std::size_t dataset);
  std::size_t dataset() const noexcept { return dataset_; }

 private:
  std::size_t dataset_;
};

/// sqrt(mean squared error) over all cells.
double rmse(std::span<const double> pred, std::span<const double> truth);
/// Per-location RMSE of row-major S×n values.
std::vector<double> rmse_per_location(std::span<const double> pred, std::span<const double> truth,
                                      std::size_t locations);

/// rmse[method][dataset]; nullopt marks a failed run, excluded from aggregates.
using RmseMatrix = std::vector<std::vector<std::optional<double>>>;

/// RMSE divided by the per-dataset best successful RMSE.
RmseMatrix normalized_rmse(const RmseMatrix& m);
std::vector<std::optional<double>> avg_nrmse(const RmseMatrix& m);
std::vector<std::optional<double>> wst_nrmse(const RmseMatrix& m);

// ---- synthetic data --------------------------------------------------------

/// x_i(t) = base + daily + weekly harmonics + r_i(t), where
/// r_i(t) = ρ·r_i(t-1) + coupling·mean_{j∈N(i)} r_j(t-1) + σ·ε over a planted
/// proximity graph of random station coordinates.
struct SynthSpec {
  std::size_t nodes = 20;
  std::size_t slots = 4000;
  int slot_minutes = 60;
  double base = 20.0;
  double daily_amplitude = 6.0;
  double weekly_amplitude = 3.0;
  std::size_t daily_harmonics = 1;  // daily profile uses harmonics 1..H with amplitude A_d/k
  double ar_coefficient = 0.3;
  double coupling = 0.0;
  double noise_sigma = 1.0;
  double area_km = 10.0;
  double proximity_m = 2500.0;
  double origin_lat = 40.0;
  double origin_lon = -74.0;
  timeseries::Timestamp origin = 1577836800;  // 2020-01-01T00:00:00Z
  bool clamp_non_negative = false;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthDataset {
  timeseries::TrafficTensor tensor;
  graphkit::RelationGraph planted;
  ingest::StationRegistry stations;
};

SynthDataset synth_generate(const SynthSpec& spec);

// ---- suite configuration ---------------------------------------------------

struct Thresholds {
  double proximity_m = 1000.0;
  double functionality = 0.0;
  double interaction = 40.0;  // records per month
};

enum class GraphSourceKind { planted, proximity, functionality, interaction, same_line, file };

std::string_view to_string(GraphSourceKind k);

struct GraphSource {
  GraphSourceKind kind = GraphSourceKind::proximity;
  std::optional<double> threshold;  // default from the dataset thresholds
  std::string path;                 // kind == file
};

struct EventSource {
  std::string path;
  ingest::EventSchema schema;
  std::string stations;  // registry CSV; empty when `grid` is set
  std::optional<ingest::GridSpec> grid;
  int slot_minutes = 60;
  ingest::CountField field = ingest::CountField::start;
};

struct DatasetSpec {
  std::string id;
  std::variant<SynthSpec, std::string, EventSource> source;  // synth, tensor CSV path, events
  std::string stations;  // optional registry CSV for tensor-file datasets
  std::vector<GraphSource> graphs;
  Thresholds thresholds;
};

enum class MethodKind { hm_tc, hm_tm, ar, learned };

struct ModelSettings {
  std::size_t hidden_units = 64;
  std::size_t gal_units = 64;
  std::size_t heads = 2;
  std::size_t dense_units = 64;
  std::size_t cheb_order = 1;
  graphkit::ChebyshevMode cheb_mode = graphkit::ChebyshevMode::scaled;
};

struct TrainingSettings {
  train::TrainConfig config;
  std::size_t max_train_samples = 0;  // 0 keeps all; otherwise an evenly strided subset
};

struct MethodSpec {
  std::string id;
  std::string method;  // HM(TC), HM(TM), AR or a model variant name
  MethodKind kind = MethodKind::hm_tc;
  timeseries::FactorSpec factors;
  ModelSettings model;
  TrainingSettings training;
};

struct SuiteConfig {
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string output_dir = "stmeta-out";
  bool self_check = true;
  timeseries::NormalizerMode normalizer = timeseries::NormalizerMode::zscore;
  std::size_t hm_closeness = 6;
  std::size_t ar_order = 6;
  std::vector<DatasetSpec> datasets;
  std::vector<MethodSpec> methods;

  const DatasetSpec& dataset(std::string_view id) const;
  const MethodSpec& method(std::string_view id) const;
};

/// Values supplied on the command line; they win over the file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> output_dir;
};

/// Parses a JSON suite. Relative paths resolve against `base_dir`; referenced
/// files must exist. Errors are ConfigError with `source:line: message`.
SuiteConfig parse_suite_config(std::string_view text, std::string_view source_name, const std::string& base_dir,
                               const ConfigOverrides& overrides = {});
SuiteConfig load_suite_config(const std::string& path, const ConfigOverrides& overrides = {});

/// Fully resolved configuration as canonical (sorted-key) JSON.
std::string effective_config_json(const SuiteConfig& cfg);
/// FNV-1a 64 of the effective config without output_dir and workers, as 16 hex digits.
std::string config_digest(const SuiteConfig& cfg);

SynthSpec parse_synth_spec(std::string_view text, std::string_view source_name);
std::string synth_spec_json(const SynthSpec& spec);

/// Event-ingest job: a standalone document with the fields of a dataset `events` object.
EventSource parse_event_source(std::string_view text, std::string_view source_name, const std::string& base_dir);
std::string event_source_json(const EventSource& ev);

/// 16 hex digits of FNV-1a 64 over `text`.
std::string digest_text(std::string_view text);

// ---- runs ------------------------------------------------------------------

struct PreparedDataset {
  std::string id;
  timeseries::TrafficTensor raw;
  timeseries::Split split;
  timeseries::Normalizer normalizer;
  timeseries::TrafficTensor normalized;
  std::vector<graphkit::RelationGraph> graphs;
  std::vector<std::string> graph_labels;
};

timeseries::TrafficTensor load_dataset_tensor(const DatasetSpec& spec);
PreparedDataset prepare_dataset(const DatasetSpec& spec, const SuiteConfig& suite);

struct RunResult {
  std::string method;
  std::string dataset;
  bool ok = false;
  std::string error;
  double rmse = 0.0;
  std::vector<double> rmse_per_location;
  std::size_t test_samples = 0;
  double train_seconds = 0.0;
  double inference_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::size_t epochs = 0;
  std::string stop_reason;
  std::vector<double> pred;   // test predictions, original units; kept in memory only
  std::vector<double> truth;
};

/// Seed of one (method, dataset) run, independent of scheduling order.
std::uint64_t run_seed(std::uint64_t suite_seed, std::string_view method, std::string_view dataset);

struct LearnedRun {
  models::STMetaModel model;
  train::TrainHistory history;
};

/// Untrained model of a learned method, shaped for a prepared dataset.
models::STMetaModel build_learned(const MethodSpec& method, const PreparedDataset& data, std::uint64_t seed);
/// Builds and trains a learned method on a prepared dataset.
LearnedRun train_learned(const MethodSpec& method, const PreparedDataset& data, std::uint64_t seed);
/// Test-split predictions in original units (S×n) and their truth.
struct TestPrediction {
  std::vector<double> pred;
  std::vector<double> truth;
  std::size_t locations = 0;
};
TestPrediction predict_test(const models::STMetaModel& model, const MethodSpec& method, const PreparedDataset& data);

RunResult run_method(const MethodSpec& method, const PreparedDataset& data, const SuiteConfig& suite);

struct BenchReport {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  RmseMatrix rmse;
  std::vector<std::optional<double>> avg_nrmse;
  std::vector<std::optional<double>> wst_nrmse;
  std::vector<RunResult> runs;  // method-major
  std::string config_digest;
  std::string effective_config;
  bool self_checked = false;

  bool all_ok() const;
};

using ProgressFn = std::function<void(const RunResult&)>;

/// Runs every (method, dataset) pair on a pool of `suite.workers` threads.
BenchReport run_benchmark(const SuiteConfig& suite, const ProgressFn& progress = {});

/// Recomputes RMSE aggregates with plain loops; throws Error on any mismatch.
void self_check(const BenchReport& report);

/// Columns: method, datasets in config order, AvgNRMSE, WstNRMSE. Failed cells are empty.
void write_report_csv(std::ostream& os, const BenchReport& report);
void write_report_json(std::ostream& os, const BenchReport& report);

}  // namespace stmeta::bench
