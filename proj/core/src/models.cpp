#include "stmeta/models.hpp"

#include <fstream>
#include <random>

#include <json.hpp>

#include "stmeta/errors.hpp"
#include "stmeta/numerics/ops.hpp"
#include "stmeta/numerics/optim.hpp"

namespace stmeta::models {

namespace ops = numerics;
using graphkit::DiffusionBundle;
using graphkit::LaplacianBundle;
using timeseries::FactorSampleSet;

// ---- ParamStore ------------------------------------------------------------

Tensor& ParamStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  if (!value.is_leaf()) value = Tensor::parameter(value.shape(), value.storage());
  index_.emplace(name, tensors_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
  return tensors_.back();
}

bool ParamStore::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

const Tensor& ParamStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("missing parameter '" + std::string(name) + "'");
  return tensors_[it->second];
}

Tensor& ParamStore::get(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).get(name));
}

void ParamStore::assign(std::string_view name, std::vector<double> values) {
  Tensor& t = get(name);
  if (values.size() != t.size()) {
    throw ShapeError("parameter '" + std::string(name) + "' expects " + std::to_string(t.size()) + " values");
  }
  t = t.with_values(std::move(values));
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

// ---- cells -----------------------------------------------------------------

namespace {

void require_rows(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) {
    throw ShapeError(std::string(what) + ": row mismatch " + ops::to_string(a.shape()) + " vs " +
                     ops::to_string(b.shape()));
  }
}

CellState lstm_gates(const Tensor& gates, const Tensor& c, std::size_t hidden) {
  if (gates.cols() != 4 * hidden) throw ShapeError("LSTM gate block must have 4H columns");
  const Tensor i = ops::sigmoid(ops::slice(gates, 1, 0, hidden));
  const Tensor f = ops::sigmoid(ops::slice(gates, 1, hidden, hidden));
  const Tensor o = ops::sigmoid(ops::slice(gates, 1, 2 * hidden, hidden));
  const Tensor g = ops::tanh(ops::slice(gates, 1, 3 * hidden, hidden));
  Tensor c_next = ops::add(ops::mul(f, c), ops::mul(i, g));
  Tensor h_next = ops::mul(o, ops::tanh(c_next));
  return {std::move(h_next), std::move(c_next)};
}

}  // namespace

CellState lstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const LSTMCellParams& p) {
  require_rows(x, h, "lstm_step");
  require_rows(h, c, "lstm_step");
  const Tensor gates = ops::add_row_vector(ops::add(ops::matmul(x, p.wx), ops::matmul(h, p.wh)), p.b);
  return lstm_gates(gates, c, h.cols());
}

CellState gclstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const LaplacianBundle& bundle,
                      const GCLSTMCellParams& p) {
  require_rows(x, h, "gclstm_step");
  require_rows(h, c, "gclstm_step");
  const Tensor gates =
      ops::add_row_vector(ops::add(graphkit::graph_conv(x, p.wx, bundle), graphkit::graph_conv(h, p.wh, bundle)), p.b);
  return lstm_gates(gates, c, h.cols());
}

Tensor diffusion_conv(const Tensor& z, std::span<const Tensor> theta_fwd, std::span<const Tensor> theta_rev,
                      const DiffusionBundle& bundle) {
  if (theta_fwd.size() != bundle.order + 1 || theta_rev.size() != bundle.order + 1) {
    throw ShapeError("diffusion_conv: expected " + std::to_string(bundle.order + 1) + " weights per direction");
  }
  if (z.rank() != 2 || z.rows() % bundle.n != 0) {
    throw ShapeError("diffusion_conv: input " + ops::to_string(z.shape()) + " does not fit a graph of " +
                     std::to_string(bundle.n) + " nodes");
  }
  Tensor out = ops::add(ops::matmul(z, theta_fwd[0]), ops::matmul(z, theta_rev[0]));
  for (std::size_t k = 1; k <= bundle.order; ++k) {
    const Tensor zf = ops::block_left_multiply(bundle.forward[k], z);
    const Tensor zr = bundle.symmetric ? zf : ops::block_left_multiply(bundle.reverse[k], z);
    out = ops::add(out, ops::add(ops::matmul(zf, theta_fwd[k]), ops::matmul(zr, theta_rev[k])));
  }
  return out;
}

Tensor dcgru_step(const Tensor& x, const Tensor& h, const DiffusionBundle& bundle, const DCGRUCellParams& p) {
  require_rows(x, h, "dcgru_step");
  const std::size_t hidden = h.cols();
  const Tensor gates =
      ops::sigmoid(ops::add_row_vector(diffusion_conv(ops::concat({x, h}, 1), p.gate_fwd, p.gate_rev, bundle), p.gate_b));
  if (gates.cols() != 2 * hidden) throw ShapeError("DCGRU gate block must have 2H columns");
  const Tensor u = ops::slice(gates, 1, 0, hidden);
  const Tensor r = ops::slice(gates, 1, hidden, hidden);
  const Tensor cand = ops::tanh(
      ops::add_row_vector(diffusion_conv(ops::concat({x, ops::mul(r, h)}, 1), p.cand_fwd, p.cand_rev, bundle), p.cand_b));
  return ops::add(ops::mul(u, h), ops::mul(ops::sub(Tensor::filled(u.shape(), 1.0), u), cand));
}

// ---- aggregation -----------------------------------------------------------

GALResult gal_aggregate_detailed(std::span<const Tensor> nodes, const GALParams& p) {
  if (nodes.empty()) throw PreconditionError("GAL needs at least one node");
  if (p.w.empty() || p.w.size() != p.a.size()) throw ShapeError("GAL needs matching W and a per head");
  const std::size_t count = nodes.size();
  for (const auto& n : nodes) require_rows(nodes[0], n, "gal_aggregate");
  const std::size_t out_dim = p.w[0].cols();

  GALResult res;
  Tensor head_sum;
  for (std::size_t m = 0; m < p.w.size(); ++m) {
    if (p.a[m].rows() != 2 * p.w[m].cols() || p.a[m].cols() != 1 || p.w[m].cols() != out_dim) {
      throw ShapeError("GAL head " + std::to_string(m) + ": attention vector must be 2F'×1");
    }
    const Tensor a_self = ops::slice(p.a[m], 0, 0, out_dim);
    const Tensor a_other = ops::slice(p.a[m], 0, out_dim, out_dim);
    std::vector<Tensor> proj, s_self, s_other;
    for (const auto& node : nodes) {
      proj.push_back(ops::matmul(node, p.w[m]));
      s_self.push_back(ops::matmul(proj.back(), a_self));
      s_other.push_back(ops::matmul(proj.back(), a_other));
    }
    std::vector<Tensor> outputs;
    res.attention.emplace_back();
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<Tensor> scores;
      for (std::size_t j = 0; j < count; ++j) scores.push_back(ops::add(s_self[i], s_other[j]));
      const Tensor alpha = ops::softmax_rows(ops::concat(scores, 1));
      Tensor mixed = ops::scale_rows(proj[0], ops::slice(alpha, 1, 0, 1));
      for (std::size_t j = 1; j < count; ++j) mixed = ops::add(mixed, ops::scale_rows(proj[j], ops::slice(alpha, 1, j, 1)));
      outputs.push_back(ops::leaky_relu(mixed));
      res.attention.back().push_back(alpha);
    }
    // average pooling over nodes, then over heads
    Tensor pooled = outputs[0];
    for (std::size_t i = 1; i < count; ++i) pooled = ops::add(pooled, outputs[i]);
    pooled = ops::scale(pooled, 1.0 / static_cast<double>(count));
    head_sum = m == 0 ? pooled : ops::add(head_sum, pooled);
  }
  res.output = ops::scale(head_sum, 1.0 / static_cast<double>(p.w.size()));
  return res;
}

Tensor gal_aggregate(std::span<const Tensor> nodes, const GALParams& p) {
  return gal_aggregate_detailed(nodes, p).output;
}

Tensor dense(const Tensor& x, const DenseParams& p) { return ops::add_row_vector(ops::matmul(x, p.w), p.b); }

Tensor concat_dense_aggregate(std::span<const Tensor> nodes, const DenseParams& p) {
  if (nodes.empty()) throw PreconditionError("concat aggregation needs at least one node");
  const Tensor joined = nodes.size() == 1 ? nodes[0] : ops::concat(nodes, 1);
  return ops::leaky_relu(dense(joined, p));
}

// ---- configuration ---------------------------------------------------------

std::string_view to_string(STUnit u) {
  switch (u) {
    case STUnit::gclstm: return "GCLSTM";
    case STUnit::dcgru: return "DCGRU";
    case STUnit::lstm: return "LSTM";
  }
  return "?";
}

std::string_view to_string(Aggregator a) { return a == Aggregator::gal ? "GAL" : "concat"; }

const std::vector<std::string>& STMetaConfig::variant_names() {
  static const std::vector<std::string> names{"STMeta-GCL-GAL", "STMeta-GCL-CON", "STMeta-DCG-GAL",
                                              "TMeta-LSTM-GAL"};
  return names;
}

STMetaConfig STMetaConfig::from_variant(std::string_view name) {
  STMetaConfig cfg;
  cfg.variant = std::string(name);
  if (name == "STMeta-GCL-GAL") {
    cfg.unit = STUnit::gclstm;
  } else if (name == "STMeta-GCL-CON") {
    cfg.unit = STUnit::gclstm;
    cfg.temporal = Aggregator::concat;
  } else if (name == "STMeta-DCG-GAL") {
    cfg.unit = STUnit::dcgru;
  } else if (name == "TMeta-LSTM-GAL") {
    cfg.unit = STUnit::lstm;
  } else {
    throw ConfigError("unknown model variant '" + std::string(name) + "'");
  }
  return cfg;
}

void STMetaConfig::validate() const {
  if (hidden_units == 0 || gal_units == 0 || dense_units == 0) throw ConfigError("layer widths must be positive");
  if (heads == 0) throw ConfigError("GAL needs at least one head");
  if (spatial != Aggregator::gal) throw ConfigError("spatial aggregation supports GAL only");
}

// ---- STMetaModel -----------------------------------------------------------

namespace {

const std::vector<double>& factor_values(const FactorSampleSet& b, std::string_view factor, std::size_t& lags) {
  if (factor == "closeness") {
    lags = b.closeness_lags;
    return b.x_closeness;
  }
  if (factor == "daily") {
    lags = b.daily_lags;
    return b.x_daily;
  }
  if (factor == "weekly") {
    lags = b.weekly_lags;
    return b.x_weekly;
  }
  throw ConfigError("unknown factor '" + std::string(factor) + "'");
}

std::vector<Tensor> stack(const ParamStore& ps, const std::string& prefix, std::size_t count) {
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(ps.get(prefix + "." + std::to_string(k)));
  return out;
}

}  // namespace

Tensor factor_lag_column(const FactorSampleSet& batch, std::string_view factor, std::size_t lag) {
  std::size_t lags = 0;
  const auto& src = factor_values(batch, factor, lags);
  if (lag >= lags) throw ShapeError("lag index out of range for factor '" + std::string(factor) + "'");
  const std::size_t rows = batch.samples * batch.locations;
  std::vector<double> col(rows);
  for (std::size_t r = 0; r < rows; ++r) col[r] = src[r * lags + lag];
  return Tensor::matrix(rows, 1, std::move(col));
}

std::string STMetaModel::unit_prefix(std::size_t graph, std::string_view factor) {
  return "g" + std::to_string(graph) + "." + std::string(factor);
}

void STMetaModel::add_param(const std::string& name, numerics::Shape shape, std::uint64_t& seed_state) {
  std::mt19937_64 mix(seed_state);
  seed_state = mix();
  params_.add(name, numerics::glorot_init(shape, seed_state));
}

void STMetaModel::add_filled(const std::string& name, numerics::Shape shape, double value) {
  const std::size_t n = numerics::element_count(shape);
  params_.add(name, Tensor::parameter(std::move(shape), std::vector<double>(n, value)));
}

STMetaModel::STMetaModel(STMetaConfig cfg, timeseries::FactorSpec factors,
                         std::vector<graphkit::RelationGraph> graphs, std::size_t locations, std::uint64_t seed)
    : cfg_(std::move(cfg)), factors_(factors), locations_(locations) {
  cfg_.validate();
  factors_.validate();
  if (locations_ == 0) throw ConfigError("model needs at least one location");
  if (factors_.closeness) active_.push_back({"closeness", factors_.closeness});
  if (factors_.daily) active_.push_back({"daily", factors_.daily});
  if (factors_.weekly) active_.push_back({"weekly", factors_.weekly});

  if (cfg_.temporal_only()) {
    graphs.clear();
  } else if (graphs.empty()) {
    throw ConfigError(cfg_.variant + " needs at least one graph");
  }
  for (auto& g : graphs) {
    if (g.n != locations_) throw ConfigError("graph size does not match the location count");
    GraphInput in;
    if (cfg_.unit == STUnit::gclstm) in.laplacian = graphkit::normalized_laplacian(g, cfg_.cheb_order, cfg_.cheb_mode);
    if (cfg_.unit == STUnit::dcgru) in.diffusion = graphkit::random_walk_bundle(g, cfg_.cheb_order);
    in.graph = std::move(g);
    graphs_.push_back(std::move(in));
  }

  const std::size_t H = cfg_.hidden_units;
  const std::size_t K = cfg_.cheb_order;
  const std::size_t units = cfg_.temporal_only() ? 1 : graphs_.size();
  std::uint64_t s = seed;

  auto add_temporal = [&](const std::string& prefix) {
    if (cfg_.temporal == Aggregator::gal) {
      for (std::size_t m = 0; m < cfg_.heads; ++m) {
        add_param(prefix + ".gal.w." + std::to_string(m), {H, cfg_.gal_units}, s);
        add_param(prefix + ".gal.a." + std::to_string(m), {2 * cfg_.gal_units, 1}, s);
      }
    } else {
      add_param(prefix + ".dense.w", {active_.size() * H, cfg_.gal_units}, s);
      add_filled(prefix + ".dense.b", {1, cfg_.gal_units}, 0.0);
    }
  };

  for (std::size_t g = 0; g < units; ++g) {
    for (const auto& f : active_) {
      if (cfg_.temporal_only()) {
        const std::string p = f.name + ".lstm";
        add_param(p + ".wx", {1, 4 * H}, s);
        add_param(p + ".wh", {H, 4 * H}, s);
        std::vector<double> b(4 * H, 0.0);
        std::fill(b.begin() + static_cast<std::ptrdiff_t>(H), b.begin() + static_cast<std::ptrdiff_t>(2 * H), 1.0);
        params_.add(p + ".b", Tensor::parameter({1, 4 * H}, std::move(b)));
      } else if (cfg_.unit == STUnit::gclstm) {
        const std::string p = unit_prefix(g, f.name) + ".gclstm";
        for (std::size_t k = 0; k <= K; ++k) add_param(p + ".wx." + std::to_string(k), {1, 4 * H}, s);
        for (std::size_t k = 0; k <= K; ++k) add_param(p + ".wh." + std::to_string(k), {H, 4 * H}, s);
        std::vector<double> b(4 * H, 0.0);
        std::fill(b.begin() + static_cast<std::ptrdiff_t>(H), b.begin() + static_cast<std::ptrdiff_t>(2 * H), 1.0);
        params_.add(p + ".b", Tensor::parameter({1, 4 * H}, std::move(b)));
      } else {
        const std::string p = unit_prefix(g, f.name) + ".dcgru";
        for (std::size_t k = 0; k <= K; ++k) add_param(p + ".gate_fwd." + std::to_string(k), {1 + H, 2 * H}, s);
        for (std::size_t k = 0; k <= K; ++k) add_param(p + ".gate_rev." + std::to_string(k), {1 + H, 2 * H}, s);
        add_filled(p + ".gate_b", {1, 2 * H}, 1.0);
        for (std::size_t k = 0; k <= K; ++k) add_param(p + ".cand_fwd." + std::to_string(k), {1 + H, H}, s);
        for (std::size_t k = 0; k <= K; ++k) add_param(p + ".cand_rev." + std::to_string(k), {1 + H, H}, s);
        add_filled(p + ".cand_b", {1, H}, 0.0);
      }
    }
    add_temporal(cfg_.temporal_only() ? std::string("temporal") : "g" + std::to_string(g) + ".temporal");
  }
  if (graphs_.size() >= 2) {
    for (std::size_t m = 0; m < cfg_.heads; ++m) {
      add_param("spatial.gal.w." + std::to_string(m), {cfg_.gal_units, cfg_.gal_units}, s);
      add_param("spatial.gal.a." + std::to_string(m), {2 * cfg_.gal_units, 1}, s);
    }
  }
  add_param("head.dense1.w", {cfg_.gal_units, cfg_.dense_units}, s);
  add_filled("head.dense1.b", {1, cfg_.dense_units}, 0.0);
  add_param("head.dense2.w", {cfg_.dense_units, cfg_.dense_units}, s);
  add_filled("head.dense2.b", {1, cfg_.dense_units}, 0.0);
  add_param("head.out.w", {cfg_.dense_units, 1}, s);
  add_filled("head.out.b", {1, 1}, 0.0);
}

Tensor STMetaModel::run_unit(std::size_t graph, const FactorInput& f, const FactorSampleSet& batch) const {
  const std::size_t rows = batch.samples * locations_;
  const std::size_t H = cfg_.hidden_units;
  const std::size_t K = cfg_.cheb_order;
  Tensor h = Tensor::zeros({rows, H});
  Tensor c = Tensor::zeros({rows, H});
  if (cfg_.temporal_only()) {
    const std::string p = f.name + ".lstm";
    const LSTMCellParams cell{params_.get(p + ".wx"), params_.get(p + ".wh"), params_.get(p + ".b")};
    for (std::size_t l = 0; l < f.lags; ++l) {
      auto st = lstm_step(factor_lag_column(batch, f.name, l), h, c, cell);
      h = std::move(st.h);
      c = std::move(st.c);
    }
  } else if (cfg_.unit == STUnit::gclstm) {
    const std::string p = unit_prefix(graph, f.name) + ".gclstm";
    const GCLSTMCellParams cell{stack(params_, p + ".wx", K + 1), stack(params_, p + ".wh", K + 1),
                                params_.get(p + ".b")};
    for (std::size_t l = 0; l < f.lags; ++l) {
      auto st = gclstm_step(factor_lag_column(batch, f.name, l), h, c, graphs_[graph].laplacian, cell);
      h = std::move(st.h);
      c = std::move(st.c);
    }
  } else {
    const std::string p = unit_prefix(graph, f.name) + ".dcgru";
    const DCGRUCellParams cell{stack(params_, p + ".gate_fwd", K + 1), stack(params_, p + ".gate_rev", K + 1),
                               params_.get(p + ".gate_b"),          stack(params_, p + ".cand_fwd", K + 1),
                               stack(params_, p + ".cand_rev", K + 1), params_.get(p + ".cand_b")};
    for (std::size_t l = 0; l < f.lags; ++l) {
      h = dcgru_step(factor_lag_column(batch, f.name, l), h, graphs_[graph].diffusion, cell);
    }
  }
  return h;
}

Tensor STMetaModel::aggregate(std::span<const Tensor> nodes, Aggregator kind, const std::string& prefix) const {
  if (kind == Aggregator::concat) {
    return concat_dense_aggregate(nodes, {params_.get(prefix + ".dense.w"), params_.get(prefix + ".dense.b")});
  }
  GALParams p;
  for (std::size_t m = 0; m < cfg_.heads; ++m) {
    p.w.push_back(params_.get(prefix + ".gal.w." + std::to_string(m)));
    p.a.push_back(params_.get(prefix + ".gal.a." + std::to_string(m)));
  }
  return gal_aggregate(nodes, p);
}

Tensor STMetaModel::forward(const FactorSampleSet& batch) const {
  if (batch.locations != locations_) {
    throw ShapeError("batch has " + std::to_string(batch.locations) + " locations, model expects " +
                     std::to_string(locations_));
  }
  if (batch.closeness_lags != factors_.closeness || batch.daily_lags != factors_.daily ||
      batch.weekly_lags != factors_.weekly) {
    throw ShapeError("batch lag windows do not match the model's factor spec");
  }
  if (batch.samples == 0) throw PreconditionError("empty batch");

  const std::size_t units = cfg_.temporal_only() ? 1 : graphs_.size();
  std::vector<Tensor> per_graph;
  for (std::size_t g = 0; g < units; ++g) {
    std::vector<Tensor> reps;
    for (const auto& f : active_) reps.push_back(run_unit(g, f, batch));
    const std::string prefix = cfg_.temporal_only() ? std::string("temporal") : "g" + std::to_string(g) + ".temporal";
    per_graph.push_back(aggregate(reps, cfg_.temporal, prefix));
  }
  const Tensor z = per_graph.size() >= 2 ? aggregate(per_graph, Aggregator::gal, "spatial") : per_graph[0];
  const Tensor d1 = ops::leaky_relu(dense(z, {params_.get("head.dense1.w"), params_.get("head.dense1.b")}));
  const Tensor d2 = ops::leaky_relu(dense(d1, {params_.get("head.dense2.w"), params_.get("head.dense2.b")}));
  return dense(d2, {params_.get("head.out.w"), params_.get("head.out.b")});
}

// ---- checkpoints -----------------------------------------------------------

void write_checkpoint(std::ostream& os, const STMetaModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "stmeta-checkpoint";
  j["version"] = kCheckpointVersion;
  j["variant"] = model.config().variant;
  j["locations"] = model.locations();
  auto& arr = j["params"] = nlohmann::ordered_json::array();
  const auto& ps = model.params();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const Tensor& t = ps.tensors()[k];
    arr.push_back({{"name", ps.names()[k]}, {"shape", t.shape()}, {"values", t.storage()}});
  }
  os << j.dump() << '\n';
}

Checkpoint read_checkpoint(std::istream& is) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(std::string("checkpoint: ") + e.what());
  }
  Checkpoint c;
  try {
    if (j.at("format") != "stmeta-checkpoint") throw IngestError("not a stmeta checkpoint");
    c.version = j.at("version").get<int>();
    if (c.version != kCheckpointVersion) {
      throw IngestError("unsupported checkpoint version " + std::to_string(c.version));
    }
    c.variant = j.at("variant").get<std::string>();
    c.locations = j.at("locations").get<std::size_t>();
    for (const auto& p : j.at("params")) {
      c.names.push_back(p.at("name").get<std::string>());
      c.tensors.emplace_back(p.at("shape").get<numerics::Shape>(), p.at("values").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(std::string("checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw IngestError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::string& path, const STMetaModel& model) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, model);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

void restore(STMetaModel& model, const Checkpoint& ckpt) {
  auto& ps = model.params();
  if (ckpt.variant != model.config().variant || ckpt.locations != model.locations()) {
    throw ConfigError("checkpoint was written for " + ckpt.variant + " on " + std::to_string(ckpt.locations) +
                      " locations");
  }
  if (ckpt.names != ps.names()) throw ConfigError("checkpoint parameter names do not match the model");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    if (ckpt.tensors[k].shape() != ps.tensors()[k].shape()) {
      throw ConfigError("checkpoint shape mismatch for '" + ps.names()[k] + "'");
    }
    ps.tensors()[k] = ps.tensors()[k].with_values(ckpt.tensors[k].storage());
  }
}

}  // namespace stmeta::models
