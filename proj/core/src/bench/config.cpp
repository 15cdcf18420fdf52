#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stmeta/bench.hpp"
#include "util/json_config.hpp"

namespace stmeta::bench {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using util::Node;

template <class Fn>
void check(const Node& node, Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    node.fail(e.what());
  }
}

std::string resolve_file(const Node& node, const std::string& base_dir) {
  const std::string raw = node.as_string();
  if (raw.empty()) node.fail("path must not be empty");
  fs::path p(raw);
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  p = p.lexically_normal();
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) node.fail("file not found: " + p.string());
  return p.string();
}

// ---- sections ----------------------------------------------------------------

timeseries::FactorSpec read_factors(const Node& n, timeseries::FactorSpec f) {
  n.object({"closeness", "daily", "weekly"});
  n.read("closeness", f.closeness);
  n.read("daily", f.daily);
  n.read("weekly", f.weekly);
  check(n, [&] { f.validate(); });
  return f;
}

ModelSettings read_model(const Node& n, ModelSettings m) {
  n.object({"hidden_units", "gal_units", "heads", "dense_units", "cheb_order", "cheb_mode"});
  n.read("hidden_units", m.hidden_units, 1);
  n.read("gal_units", m.gal_units, 1);
  n.read("heads", m.heads, 1);
  n.read("dense_units", m.dense_units, 1);
  n.read("cheb_order", m.cheb_order);
  if (n.has("cheb_mode")) {
    const auto mode = n.at("cheb_mode").as_string();
    if (mode == "scaled") {
      m.cheb_mode = graphkit::ChebyshevMode::scaled;
    } else if (mode == "raw") {
      m.cheb_mode = graphkit::ChebyshevMode::raw;
    } else {
      n.at("cheb_mode").fail("cheb_mode must be 'scaled' or 'raw'");
    }
  }
  return m;
}

TrainingSettings read_training(const Node& n, TrainingSettings t) {
  n.object({"batch_size", "learning_rate", "max_epochs", "clip_norm", "patience", "p_threshold", "min_epochs",
            "max_train_samples", "beta1", "beta2", "epsilon"});
  auto& c = t.config;
  n.read("batch_size", c.batch_size, 1);
  n.read("learning_rate", c.learning_rate);
  n.read("max_epochs", c.max_epochs);
  n.read("clip_norm", c.clip_norm);
  n.read("patience", c.stop.patience);
  n.read("p_threshold", c.stop.p_threshold);
  n.read("min_epochs", c.stop.min_epochs);
  n.read("max_train_samples", t.max_train_samples);
  n.read("beta1", c.beta1);
  n.read("beta2", c.beta2);
  n.read("epsilon", c.epsilon);
  check(n, [&] { c.validate(); });
  return t;
}

Thresholds read_thresholds(const Node& n, Thresholds t) {
  n.object({"proximity_m", "functionality", "interaction"});
  n.read("proximity_m", t.proximity_m);
  n.read("functionality", t.functionality);
  n.read("interaction", t.interaction);
  if (!(t.proximity_m > 0.0)) n.at("proximity_m").fail("proximity_m must be positive");
  return t;
}

SynthSpec read_synth(const Node& n) {
  n.object({"nodes", "slots", "slot_minutes", "base", "daily_amplitude", "weekly_amplitude", "daily_harmonics",
            "ar_coefficient", "coupling", "noise_sigma", "area_km", "proximity_m", "origin_lat", "origin_lon", "origin",
            "clamp_non_negative", "seed"});
  SynthSpec s;
  n.read("nodes", s.nodes);
  n.read("slots", s.slots);
  if (n.has("slot_minutes")) s.slot_minutes = n.at("slot_minutes").as_int();
  n.read("base", s.base);
  n.read("daily_amplitude", s.daily_amplitude);
  n.read("weekly_amplitude", s.weekly_amplitude);
  n.read("daily_harmonics", s.daily_harmonics);
  n.read("ar_coefficient", s.ar_coefficient);
  n.read("coupling", s.coupling);
  n.read("noise_sigma", s.noise_sigma);
  n.read("area_km", s.area_km);
  n.read("proximity_m", s.proximity_m);
  n.read("origin_lat", s.origin_lat);
  n.read("origin_lon", s.origin_lon);
  if (n.has("origin")) {
    const auto node = n.at("origin");
    check(node, [&] { s.origin = timeseries::parse_iso_time(node.as_string()); });
  }
  n.read("clamp_non_negative", s.clamp_non_negative);
  if (n.has("seed")) s.seed = n.at("seed").as_u64();
  check(n, [&] { s.validate(); });
  return s;
}

ingest::GridSpec read_grid(const Node& n) {
  n.object({"origin_lat", "origin_lon", "rows", "cols", "cell_km"});
  ingest::GridSpec g;
  g.origin_lat = n.at("origin_lat").as_double();
  g.origin_lon = n.at("origin_lon").as_double();
  g.rows = n.at("rows").as_size(1);
  g.cols = n.at("cols").as_size(1);
  n.read("cell_km", g.cell_km);
  check(n, [&] { g.validate(); });
  return g;
}

EventSource read_events(const Node& n, const std::string& base_dir) {
  n.object({"path", "schema", "stations", "grid", "slot_minutes", "field"});
  EventSource ev;
  ev.path = resolve_file(n.at("path"), base_dir);
  const auto schema = n.at("schema");
  schema.object({"time_format", "start_time", "end_time", "start_station", "end_station", "start_lat", "start_lon",
                 "end_lat", "end_lon"});
  check(schema, [&] { ev.schema = ingest::EventSchema::from_json(schema.json().dump()); });
  if (n.has("stations") == n.has("grid")) n.fail("events need exactly one of 'stations' or 'grid'");
  if (n.has("stations")) ev.stations = resolve_file(n.at("stations"), base_dir);
  if (n.has("grid")) ev.grid = read_grid(n.at("grid"));
  if (n.has("slot_minutes")) ev.slot_minutes = n.at("slot_minutes").as_int();
  if (ev.slot_minutes <= 0 || 1440 % ev.slot_minutes != 0) n.fail("slot_minutes must divide a day");
  if (n.has("field")) {
    const auto f = n.at("field");
    check(f, [&] { ev.field = ingest::parse_count_field(f.as_string()); });
  }
  return ev;
}

GraphSource read_graph_source(const Node& n, const std::string& base_dir) {
  GraphSource g;
  auto kind_of = [](const Node& k) {
    const auto s = k.as_string();
    if (s == "planted") return GraphSourceKind::planted;
    if (s == "proximity") return GraphSourceKind::proximity;
    if (s == "functionality") return GraphSourceKind::functionality;
    if (s == "interaction") return GraphSourceKind::interaction;
    if (s == "same_line") return GraphSourceKind::same_line;
    k.fail("unknown graph kind '" + s + "' (planted, proximity, functionality, interaction, same_line)");
  };
  if (n.json().is_string()) {
    g.kind = kind_of(n);
    return g;
  }
  n.object({"kind", "threshold", "file"});
  if (n.has("file")) {
    if (n.has("kind") || n.has("threshold")) n.fail("a graph file entry takes only 'file'");
    g.kind = GraphSourceKind::file;
    g.path = resolve_file(n.at("file"), base_dir);
    return g;
  }
  g.kind = kind_of(n.at("kind"));
  if (n.has("threshold")) {
    if (g.kind == GraphSourceKind::planted || g.kind == GraphSourceKind::same_line) {
      n.at("threshold").fail("this graph kind takes no threshold");
    }
    g.threshold = n.at("threshold").as_double();
  }
  return g;
}

DatasetSpec read_dataset(const Node& n, const std::string& base_dir, const Thresholds& thresholds) {
  n.object({"id", "synth", "tensor", "events", "stations", "graphs", "thresholds"});
  DatasetSpec d;
  d.thresholds = thresholds;
  d.id = n.at("id").as_string();
  if (d.id.empty()) n.at("id").fail("id must not be empty");
  const int sources = int(n.has("synth")) + int(n.has("tensor")) + int(n.has("events"));
  if (sources != 1) n.fail("a dataset needs exactly one of 'synth', 'tensor' or 'events'");
  if (n.has("synth")) d.source = read_synth(n.at("synth"));
  if (n.has("tensor")) d.source = resolve_file(n.at("tensor"), base_dir);
  if (n.has("events")) d.source = read_events(n.at("events"), base_dir);
  if (n.has("stations")) {
    if (!n.has("tensor")) n.at("stations").fail("'stations' applies to tensor datasets; events carry their own");
    d.stations = resolve_file(n.at("stations"), base_dir);
  }
  if (n.has("thresholds")) d.thresholds = read_thresholds(n.at("thresholds"), d.thresholds);
  if (n.has("graphs")) {
    const auto gs = n.at("graphs");
    gs.array();
    for (std::size_t k = 0; k < gs.size(); ++k) d.graphs.push_back(read_graph_source(gs.at(k), base_dir));
  } else if (n.has("synth")) {
    d.graphs.push_back({GraphSourceKind::planted, std::nullopt, {}});
  } else if (n.has("events") || !d.stations.empty()) {
    d.graphs.push_back({GraphSourceKind::proximity, std::nullopt, {}});
  } else {
    d.graphs.push_back({GraphSourceKind::functionality, std::nullopt, {}});
  }
  return d;
}

MethodSpec read_method(const Node& n, const timeseries::FactorSpec& factors, const ModelSettings& model,
                       const TrainingSettings& training) {
  n.object({"id", "method", "factors", "model", "training"});
  MethodSpec m;
  m.method = n.at("method").as_string();
  m.id = m.method;
  n.read("id", m.id);
  if (m.id.empty()) n.at("id").fail("id must not be empty");
  if (m.method == "HM(TC)") {
    m.kind = MethodKind::hm_tc;
  } else if (m.method == "HM(TM)") {
    m.kind = MethodKind::hm_tm;
  } else if (m.method == "AR") {
    m.kind = MethodKind::ar;
  } else {
    m.kind = MethodKind::learned;
    check(n.at("method"), [&] { (void)models::STMetaConfig::from_variant(m.method); });
  }
  if (m.kind != MethodKind::learned) {
    for (auto key : {"factors", "model", "training"}) {
      if (n.has(key)) n.at(key).fail("method " + m.method + " takes no '" + key + "' settings");
    }
    return m;
  }
  m.factors = n.has("factors") ? read_factors(n.at("factors"), factors) : factors;
  m.model = n.has("model") ? read_model(n.at("model"), model) : model;
  m.training = n.has("training") ? read_training(n.at("training"), training) : training;
  return m;
}

// ---- serialization ---------------------------------------------------------

json factors_json(const timeseries::FactorSpec& f) {
  return {{"closeness", f.closeness}, {"daily", f.daily}, {"weekly", f.weekly}};
}

json model_json(const ModelSettings& m) {
  return {{"hidden_units", m.hidden_units}, {"gal_units", m.gal_units},   {"heads", m.heads},
          {"dense_units", m.dense_units},   {"cheb_order", m.cheb_order},
          {"cheb_mode", m.cheb_mode == graphkit::ChebyshevMode::scaled ? "scaled" : "raw"}};
}

json training_json(const TrainingSettings& t) {
  const auto& c = t.config;
  return {{"batch_size", c.batch_size},  {"learning_rate", c.learning_rate},   {"max_epochs", c.effective_max_epochs()},
          {"clip_norm", c.clip_norm},    {"patience", c.stop.patience},         {"p_threshold", c.stop.p_threshold},
          {"min_epochs", c.stop.effective_min_epochs()}, {"max_train_samples", t.max_train_samples},
          {"beta1", c.beta1},            {"beta2", c.beta2},                    {"epsilon", c.epsilon}};
}

json synth_json(const SynthSpec& s) {
  return {{"nodes", s.nodes},
          {"slots", s.slots},
          {"slot_minutes", s.slot_minutes},
          {"base", s.base},
          {"daily_amplitude", s.daily_amplitude},
          {"weekly_amplitude", s.weekly_amplitude},
          {"daily_harmonics", s.daily_harmonics},
          {"ar_coefficient", s.ar_coefficient},
          {"coupling", s.coupling},
          {"noise_sigma", s.noise_sigma},
          {"area_km", s.area_km},
          {"proximity_m", s.proximity_m},
          {"origin_lat", s.origin_lat},
          {"origin_lon", s.origin_lon},
          {"origin", timeseries::format_iso_time(s.origin)},
          {"clamp_non_negative", s.clamp_non_negative},
          {"seed", s.seed}};
}

json events_json(const EventSource& ev) {
  json j{{"path", ev.path},
         {"schema", json::parse(ev.schema.to_json())},
         {"slot_minutes", ev.slot_minutes},
         {"field", std::string(ingest::to_string(ev.field))}};
  if (ev.grid) {
    j["grid"] = {{"origin_lat", ev.grid->origin_lat},
                 {"origin_lon", ev.grid->origin_lon},
                 {"rows", ev.grid->rows},
                 {"cols", ev.grid->cols},
                 {"cell_km", ev.grid->cell_km}};
  } else {
    j["stations"] = ev.stations;
  }
  return j;
}

json dataset_json(const DatasetSpec& d) {
  json j{{"id", d.id},
         {"thresholds",
          {{"proximity_m", d.thresholds.proximity_m},
           {"functionality", d.thresholds.functionality},
           {"interaction", d.thresholds.interaction}}}};
  if (const auto* s = std::get_if<SynthSpec>(&d.source)) j["synth"] = synth_json(*s);
  if (const auto* p = std::get_if<std::string>(&d.source)) j["tensor"] = *p;
  if (const auto* e = std::get_if<EventSource>(&d.source)) j["events"] = events_json(*e);
  if (!d.stations.empty()) j["stations"] = d.stations;
  json graphs = json::array();
  for (const auto& g : d.graphs) {
    if (g.kind == GraphSourceKind::file) {
      graphs.push_back({{"file", g.path}});
    } else if (g.threshold) {
      graphs.push_back({{"kind", std::string(to_string(g.kind))}, {"threshold", *g.threshold}});
    } else {
      graphs.push_back(std::string(to_string(g.kind)));
    }
  }
  j["graphs"] = std::move(graphs);
  return j;
}

json effective_json(const SuiteConfig& cfg) {
  json j;
  if (cfg.seed) j["seed"] = *cfg.seed;
  j["workers"] = cfg.workers;
  j["output_dir"] = cfg.output_dir;
  j["self_check"] = cfg.self_check;
  j["normalizer"] = std::string(timeseries::to_string(cfg.normalizer));
  j["baselines"] = {{"hm_closeness", cfg.hm_closeness}, {"ar_order", cfg.ar_order}};
  json datasets = json::array(), methods = json::array();
  for (const auto& d : cfg.datasets) datasets.push_back(dataset_json(d));
  for (const auto& m : cfg.methods) {
    json e{{"id", m.id}, {"method", m.method}};
    if (m.kind == MethodKind::learned) {
      e["factors"] = factors_json(m.factors);
      e["model"] = model_json(m.model);
      e["training"] = training_json(m.training);
    }
    methods.push_back(std::move(e));
  }
  j["datasets"] = std::move(datasets);
  j["methods"] = std::move(methods);
  return j;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

SuiteConfig parse_suite_config(std::string_view text, std::string_view source_name, const std::string& base_dir,
                               const ConfigOverrides& overrides) {
  auto cfg = util::with_config_lines(text, source_name, [&](const Node& root) {
    root.object({"seed", "workers", "output_dir", "self_check", "normalizer", "factors", "model", "training",
                 "baselines", "thresholds", "datasets", "methods"});
    SuiteConfig c;
    if (root.has("seed")) c.seed = root.at("seed").as_u64();
    root.read("workers", c.workers, 1);
    root.read("output_dir", c.output_dir);
    root.read("self_check", c.self_check);
    if (root.has("normalizer")) {
      const auto n = root.at("normalizer");
      check(n, [&] { c.normalizer = timeseries::parse_normalizer_mode(n.as_string()); });
    }
    if (root.has("baselines")) {
      const auto b = root.at("baselines");
      b.object({"hm_closeness", "ar_order"});
      b.read("hm_closeness", c.hm_closeness, 1);
      b.read("ar_order", c.ar_order);
    }
    const auto factors = root.has("factors") ? read_factors(root.at("factors"), {}) : timeseries::FactorSpec{};
    const auto model = root.has("model") ? read_model(root.at("model"), {}) : ModelSettings{};
    const auto training = root.has("training") ? read_training(root.at("training"), {}) : TrainingSettings{};
    const auto thresholds = root.has("thresholds") ? read_thresholds(root.at("thresholds"), {}) : Thresholds{};

    const auto ds = root.at("datasets");
    ds.array();
    if (ds.size() == 0) ds.fail("at least one dataset is required");
    std::set<std::string> ids;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const auto node = ds.at(k);
      auto d = read_dataset(node, base_dir, thresholds);
      if (!ids.insert(d.id).second) node.at("id").fail("duplicate dataset id '" + d.id + "'");
      c.datasets.push_back(std::move(d));
    }
    const auto ms = root.at("methods");
    ms.array();
    if (ms.size() == 0) ms.fail("at least one method is required");
    ids.clear();
    for (std::size_t k = 0; k < ms.size(); ++k) {
      auto m = read_method(ms.at(k), factors, model, training);
      if (!ids.insert(m.id).second) ms.at(k).fail("duplicate method id '" + m.id + "'");
      c.methods.push_back(std::move(m));
    }
    return c;
  });
  if (overrides.seed) cfg.seed = overrides.seed;
  if (overrides.workers) {
    if (*overrides.workers == 0) throw ConfigError("--workers must be at least 1");
    cfg.workers = *overrides.workers;
  }
  if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
  return cfg;
}

SuiteConfig load_suite_config(const std::string& path, const ConfigOverrides& overrides) {
  const auto text = read_text(path);
  return parse_suite_config(text, path, fs::path(path).parent_path().string(), overrides);
}

std::string effective_config_json(const SuiteConfig& cfg) { return effective_json(cfg).dump(2); }

std::string digest_text(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_digest(const SuiteConfig& cfg) {
  auto j = effective_json(cfg);
  j.erase("output_dir");
  j.erase("workers");
  return digest_text(j.dump());
}

SynthSpec parse_synth_spec(std::string_view text, std::string_view source_name) {
  return util::with_config_lines(text, source_name, [](const Node& root) { return read_synth(root); });
}

std::string synth_spec_json(const SynthSpec& spec) { return synth_json(spec).dump(2); }

EventSource parse_event_source(std::string_view text, std::string_view source_name, const std::string& base_dir) {
  return util::with_config_lines(text, source_name,
                                 [&](const Node& root) { return read_events(root, base_dir); });
}

std::string event_source_json(const EventSource& ev) { return events_json(ev).dump(2); }

}  // namespace stmeta::bench
