// stmeta: ingest, synth, train, evaluate and benchmark from JSON configs.

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stmeta/bench.hpp"
#include "stmeta/errors.hpp"
#include "stmeta/ingest.hpp"
#include "stmeta/models.hpp"
#include "stmeta/train.hpp"

namespace {

namespace fs = std::filesystem;
using namespace stmeta;
using nlohmann::json;

constexpr int kExitRunFailure = 1;
constexpr int kExitConfig = 2;
constexpr const char* kDefaultOut = "stmeta-out";

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  std::string method;
  std::string dataset;
  std::string checkpoint;
};

/// Files staged in memory and written together, each through a rename.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  const fs::path& dir() const { return dir_; }
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

  void commit() const {
    for (const auto& [name, content] : files_) {
      const fs::path target = dir_ / name;
      fs::create_directories(target.parent_path());
      const fs::path tmp = target.string() + ".tmp";
      {
        std::ofstream os(tmp, std::ios::binary);
        os << content;
        if (!os) throw Error("cannot write " + tmp.string());
      }
      fs::rename(tmp, target);
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string read_config_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(path + ": cannot read config file");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string base_dir_of(const std::string& path) { return fs::path(path).parent_path().string(); }

/// Output root: --out, then STMETA_OUT, then the config value.
std::string output_root(const Options& o, const std::string& configured) {
  if (o.out) return *o.out;
  if (const char* env = std::getenv("STMETA_OUT"); env && *env) return env;
  return configured;
}

bench::ConfigOverrides overrides_of(const Options& o) {
  bench::ConfigOverrides ov;
  ov.seed = o.seed;
  ov.workers = o.workers;
  if (o.out) {
    ov.output_dir = *o.out;
  } else if (const char* env = std::getenv("STMETA_OUT"); env && *env) {
    ov.output_dir = env;
  }
  return ov;
}

std::string number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <class Write, class T>
std::string to_text(Write write, const T& value) {
  std::ostringstream os;
  write(os, value);
  return os.str();
}

std::string od_csv(const std::vector<double>& od, const std::vector<std::string>& ids) {
  std::ostringstream os;
  os << "origin";
  for (const auto& id : ids) os << ',' << id;
  os << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    os << ids[i];
    for (std::size_t j = 0; j < ids.size(); ++j) os << ',' << number(od[i * ids.size() + j]);
    os << '\n';
  }
  return os.str();
}

std::string path_safe(std::string s) {
  for (char& c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return s;
}

// ---- commands --------------------------------------------------------------

int cmd_ingest(const Options& o) {
  const auto text = read_config_text(o.config);
  const auto ev = bench::parse_event_source(text, o.config, base_dir_of(o.config));
  const auto effective = bench::event_source_json(ev);
  Outputs out(fs::path(output_root(o, kDefaultOut)) / bench::digest_text(json::parse(effective).dump()));

  const auto log = ingest::read_events(ev.path, ev.schema);
  ingest::TensorBuild built;
  std::vector<double> od;
  if (ev.grid) {
    built = ingest::events_to_tensor(log.records, *ev.grid, ev.slot_minutes, ev.field);
    od = ingest::build_od_matrix(log.records, *ev.grid);
  } else {
    const auto stations = ingest::load_registry_csv(ev.stations);
    built = ingest::events_to_tensor(log.records, stations, ev.slot_minutes, ev.field);
    od = ingest::build_od_matrix(log.records, stations);
    out.add("stations.csv", to_text(ingest::write_registry_csv, stations));
  }
  out.add("config.json", effective + "\n");
  out.add("tensor.csv", to_text(timeseries::write_tensor_csv, built.tensor));
  out.add("od.csv", od_csv(od, built.tensor.location_ids));
  out.commit();
  std::cerr << "ingested " << log.records.size() << " events (" << log.skipped << " unparseable rows, "
            << built.dropped << " not counted) into " << built.tensor.slots << " slots x " << built.tensor.locations
            << " locations\n";
  std::cout << out.dir().string() << '\n';
  return 0;
}

int cmd_synth(const Options& o) {
  const auto text = read_config_text(o.config);
  auto spec = bench::parse_synth_spec(text, o.config);
  if (o.seed) spec.seed = *o.seed;
  const auto effective = bench::synth_spec_json(spec);
  Outputs out(fs::path(output_root(o, kDefaultOut)) / bench::digest_text(json::parse(effective).dump()));

  const auto d = bench::synth_generate(spec);
  out.add("config.json", effective + "\n");
  out.add("tensor.csv", to_text(timeseries::write_tensor_csv, d.tensor));
  out.add("stations.csv", to_text(ingest::write_registry_csv, d.stations));
  out.add("planted_graph.txt", to_text(graphkit::write_graph, d.planted));
  out.commit();
  std::cout << out.dir().string() << '\n';
  return 0;
}

struct Selected {
  bench::SuiteConfig suite;
  std::size_t method = 0;
  std::size_t dataset = 0;

  const bench::MethodSpec& m() const { return suite.methods[method]; }
  const bench::DatasetSpec& d() const { return suite.datasets[dataset]; }
};

Selected select_run(const Options& o) {
  Selected s;
  s.suite = bench::load_suite_config(o.config, overrides_of(o));
  const auto find = [&](const auto& list, const std::string& id, const char* what) {
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (list[k].id == id) return k;
    }
    throw ConfigError(o.config + ": no " + what + " with id '" + id + "'");
  };
  s.method = find(s.suite.methods, o.method, "method");
  s.dataset = find(s.suite.datasets, o.dataset, "dataset");
  if (s.m().kind != bench::MethodKind::learned) {
    throw ConfigError(o.config + ": method '" + o.method + "' has no trainable parameters");
  }
  if (!s.suite.seed) throw ConfigError(o.config + ": a seed is required (config 'seed' or --seed)");
  return s;
}

int cmd_train(const Options& o) {
  const auto sel = select_run(o);
  const auto digest = bench::config_digest(sel.suite);
  Outputs out(fs::path(sel.suite.output_dir) / digest);
  const auto data = bench::prepare_dataset(sel.d(), sel.suite);
  const auto seed = bench::run_seed(*sel.suite.seed, sel.m().id, sel.d().id);
  std::cerr << "training " << sel.m().id << " on " << sel.d().id << " (seed " << seed << ")\n";
  const auto run = bench::train_learned(sel.m(), data, seed);

  const std::string sub = "train/" + path_safe(sel.m().id) + "@" + path_safe(sel.d().id) + "/";
  out.add("config.json", bench::effective_config_json(sel.suite) + "\n");
  out.add(sub + "checkpoint.json", to_text(models::write_checkpoint, run.model));
  std::ostringstream hist;
  train::write_history_csv(hist, run.history);
  out.add(sub + "history.csv", hist.str());
  out.commit();
  std::cerr << "stopped after " << run.history.stop_epoch << " epochs (" << train::to_string(run.history.stop_reason)
            << "), best validation MSE " << number(run.history.best_val_loss) << " at epoch "
            << run.history.best_epoch << '\n';
  std::cout << (out.dir() / sub).string() << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto sel = select_run(o);
  if (!fs::is_regular_file(o.checkpoint)) throw ConfigError(o.checkpoint + ": checkpoint file not found");
  const auto ckpt = models::load_checkpoint(o.checkpoint);
  if (ckpt.variant != sel.m().method) {
    throw ConfigError(o.checkpoint + ": checkpoint holds " + ckpt.variant + " but method '" + sel.m().id +
                      "' is " + sel.m().method);
  }
  const auto data = bench::prepare_dataset(sel.d(), sel.suite);
  auto model = bench::build_learned(sel.m(), data, 0);
  models::restore(model, ckpt);
  const auto pred = bench::predict_test(model, sel.m(), data);
  json j;
  j["method"] = sel.m().id;
  j["dataset"] = sel.d().id;
  j["test_samples"] = data.split.test.size();
  j["rmse"] = bench::rmse(pred.pred, pred.truth);
  j["rmse_per_location"] = bench::rmse_per_location(pred.pred, pred.truth, pred.locations);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_benchmark(const Options& o) {
  const auto suite = bench::load_suite_config(o.config, overrides_of(o));
  if (!suite.seed) throw ConfigError(o.config + ": benchmark requires a seed (config 'seed' or --seed)");
  Outputs out(fs::path(suite.output_dir) / bench::config_digest(suite));

  const std::size_t total = suite.methods.size() * suite.datasets.size();
  std::size_t done = 0;
  const auto report = bench::run_benchmark(suite, [&](const bench::RunResult& r) {
    std::cerr << '[' << ++done << '/' << total << "] " << r.method << " on " << r.dataset << ": ";
    if (r.ok) {
      std::cerr << "rmse " << number(r.rmse) << " (train " << number(r.train_seconds) << " s)\n";
    } else {
      std::cerr << "FAILED: " << r.error << '\n';
    }
  });
  out.add("config.json", report.effective_config + "\n");
  out.add("report.csv", to_text(bench::write_report_csv, report));
  out.add("report.json", to_text(bench::write_report_json, report));
  out.commit();
  std::cout << out.dir().string() << '\n';
  if (!report.all_ok()) {
    std::cerr << "one or more runs failed; they are excluded from the aggregates\n";
    return kExitRunFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal traffic prediction: ingest, synthesize, train, evaluate and benchmark."};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd, bool needs_seed, bool needs_workers) {
    cmd->add_option("-c,--config", o.config, "JSON config file")->required();
    cmd->add_option("-o,--out", o.out, "output root (overrides STMETA_OUT and the config)");
    if (needs_seed) cmd->add_option("--seed", o.seed, "random seed (overrides the config)");
    if (needs_workers) cmd->add_option("--workers", o.workers, "parallel runs (overrides the config)");
  };
  auto add_selection = [&](CLI::App* cmd) {
    cmd->add_option("--method", o.method, "method id from the suite")->required();
    cmd->add_option("--dataset", o.dataset, "dataset id from the suite")->required();
  };

  auto* ingest_cmd = app.add_subcommand("ingest", "event CSV to tensor, OD matrix and station CSVs");
  add_common(ingest_cmd, false, false);
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset and its planted graph");
  add_common(synth_cmd, true, false);
  auto* train_cmd = app.add_subcommand("train", "train one learned method on one dataset");
  add_common(train_cmd, true, false);
  add_selection(train_cmd);
  auto* eval_cmd = app.add_subcommand("evaluate", "test RMSE of a checkpoint");
  add_common(eval_cmd, true, false);
  add_selection(eval_cmd);
  eval_cmd->add_option("--checkpoint", o.checkpoint, "checkpoint written by train")->required();
  auto* bench_cmd = app.add_subcommand("benchmark", "run every method on every dataset and aggregate");
  add_common(bench_cmd, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (ingest_cmd->parsed()) return cmd_ingest(o);
    if (synth_cmd->parsed()) return cmd_synth(o);
    if (train_cmd->parsed()) return cmd_train(o);
    if (eval_cmd->parsed()) return cmd_evaluate(o);
    return cmd_benchmark(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRunFailure;
  }
}
