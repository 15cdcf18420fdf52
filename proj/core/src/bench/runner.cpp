#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "stmeta/baselines.hpp"
#include "stmeta/bench.hpp"

namespace stmeta::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct SpatialContext {
  std::optional<std::vector<graphkit::GeoPoint>> coords;
  std::optional<std::vector<std::vector<std::string>>> lines;
  std::optional<std::vector<double>> od;
  std::optional<graphkit::RelationGraph> planted;
};

/// Registry rows reordered to the tensor's location ids.
ingest::StationRegistry align_registry(const ingest::StationRegistry& reg, const timeseries::TrafficTensor& t) {
  ingest::StationRegistry out;
  for (const auto& id : t.location_ids) {
    const auto k = reg.find(id);
    if (!k) throw PreconditionError("station registry has no entry for location '" + id + "'");
    out.add(reg[*k]);
  }
  return out;
}

void fill_from_registry(SpatialContext& ctx, const ingest::StationRegistry& reg) {
  ctx.coords = reg.coordinates();
  bool any_line = false;
  for (const auto& s : reg.stations()) any_line = any_line || !s.lines.empty();
  if (any_line) ctx.lines = reg.line_assignment();
}

struct Loaded {
  timeseries::TrafficTensor tensor;
  SpatialContext ctx;
};

Loaded load_with_context(const DatasetSpec& spec) {
  Loaded out;
  if (const auto* synth = std::get_if<SynthSpec>(&spec.source)) {
    auto ds = synth_generate(*synth);
    out.tensor = std::move(ds.tensor);
    fill_from_registry(out.ctx, ds.stations);
    out.ctx.planted = std::move(ds.planted);
  } else if (const auto* path = std::get_if<std::string>(&spec.source)) {
    out.tensor = timeseries::load_tensor_csv(*path);
    if (!spec.stations.empty()) {
      fill_from_registry(out.ctx, align_registry(ingest::load_registry_csv(spec.stations), out.tensor));
    }
  } else {
    const auto& ev = std::get<EventSource>(spec.source);
    const auto log = ingest::read_events(ev.path, ev.schema);
    if (ev.grid) {
      out.tensor = ingest::events_to_tensor(log.records, *ev.grid, ev.slot_minutes, ev.field).tensor;
      std::vector<graphkit::GeoPoint> centers(ev.grid->cells());
      for (std::size_t c = 0; c < centers.size(); ++c) centers[c] = ev.grid->cell_center(c);
      out.ctx.coords = std::move(centers);
      out.ctx.od = ingest::build_od_matrix(log.records, *ev.grid);
    } else {
      const auto reg = ingest::load_registry_csv(ev.stations);
      out.tensor = ingest::events_to_tensor(log.records, reg, ev.slot_minutes, ev.field).tensor;
      fill_from_registry(out.ctx, reg);
      out.ctx.od = ingest::build_od_matrix(log.records, reg);
    }
  }
  return out;
}

std::string label(std::string_view kind, double threshold) {
  std::ostringstream os;
  os << kind << '(' << threshold << ')';
  return os.str();
}

timeseries::FactorSpec run_factors(const MethodSpec& m, const SuiteConfig& suite, const PreparedDataset& data) {
  timeseries::FactorSpec f = m.factors;
  if (m.kind == MethodKind::hm_tc) f = {suite.hm_closeness, 0, 0};
  if (m.kind == MethodKind::hm_tm) f = {suite.hm_closeness, 1, 1};
  f.slot_minutes = data.raw.slot_minutes;
  return f;
}

timeseries::FactorSampleSet test_samples(const timeseries::TrafficTensor& t, const timeseries::FactorSpec& f,
                                         const timeseries::Split& split) {
  auto s = timeseries::assemble_samples(t, f, split.test);
  if (s.samples != split.test.size()) {
    throw PreconditionError("dataset is too short for the factor windows: " + std::to_string(s.samples) + " of " +
                            std::to_string(split.test.size()) + " test slots have full history");
  }
  return s;
}

std::vector<double> test_truth(const PreparedDataset& data) {
  std::vector<double> out;
  out.reserve(data.split.test.size() * data.raw.locations);
  for (std::size_t t = data.split.test.begin; t < data.split.test.end; ++t) {
    for (std::size_t i = 0; i < data.raw.locations; ++i) out.push_back(data.raw.at(t, i));
  }
  return out;
}

timeseries::FactorSampleSet strided_subset(const timeseries::FactorSampleSet& s, std::size_t limit) {
  if (limit == 0 || s.samples <= limit) return s;
  std::vector<std::size_t> idx(limit);
  for (std::size_t k = 0; k < limit; ++k) idx[k] = (k * s.samples) / limit;
  return s.select(idx);
}

}  // namespace

std::string_view to_string(GraphSourceKind k) {
  switch (k) {
    case GraphSourceKind::planted: return "planted";
    case GraphSourceKind::proximity: return "proximity";
    case GraphSourceKind::functionality: return "functionality";
    case GraphSourceKind::interaction: return "interaction";
    case GraphSourceKind::same_line: return "same_line";
    case GraphSourceKind::file: return "file";
  }
  return "?";
}

const DatasetSpec& SuiteConfig::dataset(std::string_view id) const {
  for (const auto& d : datasets) {
    if (d.id == id) return d;
  }
  throw ConfigError("unknown dataset '" + std::string(id) + "'");
}

const MethodSpec& SuiteConfig::method(std::string_view id) const {
  for (const auto& m : methods) {
    if (m.id == id) return m;
  }
  throw ConfigError("unknown method '" + std::string(id) + "'");
}

timeseries::TrafficTensor load_dataset_tensor(const DatasetSpec& spec) { return load_with_context(spec).tensor; }

PreparedDataset prepare_dataset(const DatasetSpec& spec, const SuiteConfig& suite) {
  auto loaded = load_with_context(spec);
  PreparedDataset out;
  out.id = spec.id;
  out.raw = std::move(loaded.tensor);
  out.split = timeseries::split(out.raw);
  out.normalizer = timeseries::Normalizer(suite.normalizer);
  out.normalizer.fit(out.raw, out.split.train);
  out.normalized = out.normalizer.apply(out.raw);

  const std::size_t n = out.raw.locations;
  const auto& ctx = loaded.ctx;
  for (const auto& src : spec.graphs) {
    graphkit::RelationGraph g;
    std::string name;
    switch (src.kind) {
      case GraphSourceKind::planted:
        if (!ctx.planted) throw PreconditionError("dataset '" + spec.id + "' has no planted graph");
        g = *ctx.planted;
        name = "planted";
        break;
      case GraphSourceKind::proximity: {
        if (!ctx.coords) throw PreconditionError("dataset '" + spec.id + "' has no station coordinates");
        const double thr = src.threshold.value_or(spec.thresholds.proximity_m);
        g = graphkit::build_proximity_graph(*ctx.coords, thr);
        name = label("proximity", thr);
        break;
      }
      case GraphSourceKind::functionality: {
        const double thr = src.threshold.value_or(spec.thresholds.functionality);
        g = graphkit::build_functionality_graph(out.raw, out.split.train, thr);
        name = label("functionality", thr);
        break;
      }
      case GraphSourceKind::interaction: {
        if (!ctx.od) throw PreconditionError("dataset '" + spec.id + "' has no origin-destination records");
        const double thr = src.threshold.value_or(spec.thresholds.interaction);
        const double months = static_cast<double>(out.raw.slots) * out.raw.slot_minutes / (30.0 * 1440.0);
        g = graphkit::build_interaction_graph(*ctx.od, n, thr, months);
        name = label("interaction", thr);
        break;
      }
      case GraphSourceKind::same_line:
        if (!ctx.lines) throw PreconditionError("dataset '" + spec.id + "' has no line assignment");
        g = graphkit::build_sameline_graph(*ctx.lines);
        name = "same_line";
        break;
      case GraphSourceKind::file:
        g = graphkit::load_graph(src.path);
        name = "file(" + src.path + ")";
        break;
    }
    if (g.n != n) {
      throw PreconditionError("graph " + name + " has " + std::to_string(g.n) + " nodes but dataset '" + spec.id +
                              "' has " + std::to_string(n) + " locations");
    }
    out.graphs.push_back(std::move(g));
    out.graph_labels.push_back(std::move(name));
  }
  return out;
}

std::uint64_t run_seed(std::uint64_t suite_seed, std::string_view method, std::string_view dataset) {
  std::uint64_t h = fnv1a(method);
  h = fnv1a(std::string_view("\0", 1), h);
  h = fnv1a(dataset, h);
  return splitmix(suite_seed ^ h);
}

models::STMetaModel build_learned(const MethodSpec& method, const PreparedDataset& data, std::uint64_t seed) {
  if (method.kind != MethodKind::learned) throw PreconditionError("method '" + method.id + "' is not trainable");
  auto cfg = models::STMetaConfig::from_variant(method.method);
  cfg.hidden_units = method.model.hidden_units;
  cfg.gal_units = method.model.gal_units;
  cfg.heads = method.model.heads;
  cfg.dense_units = method.model.dense_units;
  cfg.cheb_order = method.model.cheb_order;
  cfg.cheb_mode = method.model.cheb_mode;
  auto factors = method.factors;
  factors.slot_minutes = data.raw.slot_minutes;
  return models::STMetaModel(cfg, factors, cfg.temporal_only() ? std::vector<graphkit::RelationGraph>{} : data.graphs,
                             data.raw.locations, seed);
}

LearnedRun train_learned(const MethodSpec& method, const PreparedDataset& data, std::uint64_t seed) {
  auto model = build_learned(method, data, seed);
  const auto& factors = model.factors();
  const auto train_set = strided_subset(timeseries::assemble_samples(data.normalized, factors, data.split.train),
                                        method.training.max_train_samples);
  const auto val_set = timeseries::assemble_samples(data.normalized, factors, data.split.val);
  auto history = train::train_loop(model, train_set, val_set, method.training.config, splitmix(seed));
  return {std::move(model), std::move(history)};
}

TestPrediction predict_test(const models::STMetaModel& model, const MethodSpec& method, const PreparedDataset& data) {
  auto factors = method.factors;
  factors.slot_minutes = data.raw.slot_minutes;
  const auto samples = test_samples(data.normalized, factors, data.split);
  TestPrediction out;
  out.locations = data.raw.locations;
  out.pred = train::predict(model, samples);
  for (std::size_t k = 0; k < out.pred.size(); ++k) out.pred[k] = data.normalizer.invert(out.pred[k], k % out.locations);
  out.truth = test_truth(data);
  return out;
}

RunResult run_method(const MethodSpec& method, const PreparedDataset& data, const SuiteConfig& suite) {
  RunResult r;
  r.method = method.id;
  r.dataset = data.id;
  r.seed = run_seed(suite.seed.value_or(0), method.id, data.id);
  try {
    const auto factors = run_factors(method, suite, data);
    std::vector<double> pred;
    if (method.kind == MethodKind::hm_tc || method.kind == MethodKind::hm_tm) {
      const auto t0 = Clock::now();
      const auto samples = test_samples(data.raw, factors, data.split);
      const baselines::HMConfig hm{method.kind == MethodKind::hm_tc ? baselines::HMMode::TC : baselines::HMMode::TM,
                                   suite.hm_closeness};
      pred = baselines::hm_predict(samples, hm);
      r.inference_seconds = seconds_since(t0);
    } else if (method.kind == MethodKind::ar) {
      auto t0 = Clock::now();
      const auto model = baselines::ar_fit(data.raw, data.split.train, suite.ar_order);
      r.train_seconds = seconds_since(t0);
      t0 = Clock::now();
      std::vector<std::size_t> slots;
      for (std::size_t t = data.split.test.begin; t < data.split.test.end; ++t) slots.push_back(t);
      if (slots.front() < suite.ar_order) throw PreconditionError("dataset is too short for the AR order");
      pred = baselines::ar_predict(model, data.raw, slots);
      r.inference_seconds = seconds_since(t0);
    } else {
      auto t0 = Clock::now();
      auto learned = train_learned(method, data, r.seed);
      r.train_seconds = seconds_since(t0);
      r.epochs = learned.history.stop_epoch;
      r.stop_reason = std::string(train::to_string(learned.history.stop_reason));
      t0 = Clock::now();
      pred = predict_test(learned.model, method, data).pred;
      r.inference_seconds = seconds_since(t0);
    }
    r.truth = test_truth(data);
    r.rmse = rmse(pred, r.truth);
    r.rmse_per_location = rmse_per_location(pred, r.truth, data.raw.locations);
    r.test_samples = data.split.test.size();
    r.pred = std::move(pred);
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

bool BenchReport::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunResult& r) { return r.ok; });
}

BenchReport run_benchmark(const SuiteConfig& suite, const ProgressFn& progress) {
  if (!suite.seed) throw ConfigError("benchmark requires a seed");
  if (suite.datasets.empty() || suite.methods.empty()) throw ConfigError("benchmark needs datasets and methods");

  BenchReport report;
  report.config_digest = config_digest(suite);
  report.effective_config = effective_config_json(suite);
  for (const auto& m : suite.methods) report.methods.push_back(m.id);
  for (const auto& d : suite.datasets) report.datasets.push_back(d.id);

  std::vector<std::optional<PreparedDataset>> prepared(suite.datasets.size());
  std::vector<std::string> prepare_error(suite.datasets.size());
  for (std::size_t d = 0; d < suite.datasets.size(); ++d) {
    try {
      prepared[d] = prepare_dataset(suite.datasets[d], suite);
    } catch (const std::exception& e) {
      prepare_error[d] = e.what();
    }
  }

  const std::size_t jobs = suite.methods.size() * suite.datasets.size();
  report.runs.resize(jobs);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < jobs; k = next.fetch_add(1)) {
      const auto& m = suite.methods[k / suite.datasets.size()];
      const std::size_t d = k % suite.datasets.size();
      RunResult r;
      if (prepared[d]) {
        r = run_method(m, *prepared[d], suite);
      } else {
        r.method = m.id;
        r.dataset = suite.datasets[d].id;
        r.seed = run_seed(*suite.seed, m.id, r.dataset);
        r.error = "dataset preparation failed: " + prepare_error[d];
      }
      r.config_digest = report.config_digest;
      report.runs[k] = std::move(r);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(report.runs[k]);
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(suite.workers, jobs));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  report.rmse.assign(suite.methods.size(), std::vector<std::optional<double>>(suite.datasets.size()));
  for (std::size_t k = 0; k < jobs; ++k) {
    if (report.runs[k].ok) report.rmse[k / suite.datasets.size()][k % suite.datasets.size()] = report.runs[k].rmse;
  }
  report.avg_nrmse = avg_nrmse(report.rmse);
  report.wst_nrmse = wst_nrmse(report.rmse);
  if (suite.self_check) {
    self_check(report);
    report.self_checked = true;
  }
  return report;
}

}  // namespace stmeta::bench
