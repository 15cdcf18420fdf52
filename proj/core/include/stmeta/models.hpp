#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stmeta/graphkit.hpp"
#include "stmeta/numerics/tensor.hpp"
#include "stmeta/timeseries.hpp"

namespace stmeta::models {

using numerics::Tensor;

/// Named parameters in insertion order.
class ParamStore {
 public:
  Tensor& add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  /// Replaces values, keeping the parameter identity.
  void assign(std::string_view name, std::vector<double> values);

  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::string>& names() const { return names_; }
  std::span<Tensor> tensors() { return tensors_; }
  std::span<const Tensor> tensors() const { return tensors_; }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---- recurrent cells -------------------------------------------------------
// Rows of x, h and c stack B samples of n nodes (row b·n + i). Gate column
// order for LSTM-type cells is input, forget, output, candidate.

struct CellState {
  Tensor h;
  Tensor c;
};

struct LSTMCellParams {
  Tensor wx;  // F×4H
  Tensor wh;  // H×4H
  Tensor b;   // 1×4H
};

struct GCLSTMCellParams {
  std::vector<Tensor> wx;  // K+1 of F×4H
  std::vector<Tensor> wh;  // K+1 of H×4H
  Tensor b;                // 1×4H
};

/// GRU with update/reset gates stacked as [u, r]; h' = u⊙h + (1-u)⊙c.
struct DCGRUCellParams {
  std::vector<Tensor> gate_fwd;   // K+1 of (F+H)×2H
  std::vector<Tensor> gate_rev;   // K+1 of (F+H)×2H
  Tensor gate_b;                  // 1×2H
  std::vector<Tensor> cand_fwd;   // K+1 of (F+H)×H
  std::vector<Tensor> cand_rev;   // K+1 of (F+H)×H
  Tensor cand_b;                  // 1×H
};

CellState lstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const LSTMCellParams& p);
CellState gclstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const graphkit::LaplacianBundle& bundle,
                      const GCLSTMCellParams& p);

/// Σ_k fwd^k·z·θ_fwd[k] + rev^k·z·θ_rev[k].
Tensor diffusion_conv(const Tensor& z, std::span<const Tensor> theta_fwd, std::span<const Tensor> theta_rev,
                      const graphkit::DiffusionBundle& bundle);
Tensor dcgru_step(const Tensor& x, const Tensor& h, const graphkit::DiffusionBundle& bundle, const DCGRUCellParams& p);

// ---- aggregation -----------------------------------------------------------
// Each aggregand is an R×F tensor; row r of every aggregand forms one node set.

struct GALParams {
  std::vector<Tensor> w;  // per head, F×F'
  std::vector<Tensor> a;  // per head, 2F'×1
};

struct GALResult {
  Tensor output;                               // R×F'
  std::vector<std::vector<Tensor>> attention;  // [head][i] → R×N weights α_i·
};

GALResult gal_aggregate_detailed(std::span<const Tensor> nodes, const GALParams& p);
Tensor gal_aggregate(std::span<const Tensor> nodes, const GALParams& p);

struct DenseParams {
  Tensor w;  // in×out
  Tensor b;  // 1×out
};

Tensor dense(const Tensor& x, const DenseParams& p);
/// Concatenates along features, then one dense layer with leaky ReLU.
Tensor concat_dense_aggregate(std::span<const Tensor> nodes, const DenseParams& p);

// ---- meta-model ------------------------------------------------------------

enum class STUnit { gclstm, dcgru, lstm };
enum class Aggregator { gal, concat };

std::string_view to_string(STUnit u);
std::string_view to_string(Aggregator a);

struct STMetaConfig {
  std::string variant = "STMeta-GCL-GAL";
  STUnit unit = STUnit::gclstm;
  Aggregator temporal = Aggregator::gal;
  Aggregator spatial = Aggregator::gal;
  std::size_t hidden_units = 64;
  std::size_t gal_units = 64;
  std::size_t heads = 2;
  std::size_t dense_units = 64;
  std::size_t cheb_order = 1;
  graphkit::ChebyshevMode cheb_mode = graphkit::ChebyshevMode::scaled;

  /// STMeta-GCL-GAL, STMeta-GCL-CON, STMeta-DCG-GAL or TMeta-LSTM-GAL.
  static STMetaConfig from_variant(std::string_view name);
  static const std::vector<std::string>& variant_names();
  bool temporal_only() const { return unit == STUnit::lstm; }
  void validate() const;
};

struct GraphInput {
  graphkit::RelationGraph graph;
  graphkit::LaplacianBundle laplacian;
  graphkit::DiffusionBundle diffusion;
};

class STMetaModel {
 public:
  /// TMeta variants ignore `graphs`; STMeta variants need at least one.
  STMetaModel(STMetaConfig cfg, timeseries::FactorSpec factors, std::vector<graphkit::RelationGraph> graphs,
              std::size_t locations, std::uint64_t seed);

  /// (S·n)×1 predictions, row s·n + i.
  Tensor forward(const timeseries::FactorSampleSet& batch) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const STMetaConfig& config() const { return cfg_; }
  const timeseries::FactorSpec& factors() const { return factors_; }
  const std::vector<GraphInput>& graphs() const { return graphs_; }
  std::size_t locations() const { return locations_; }

  /// Prefix of the parameters of the ST unit for graph g and factor name.
  static std::string unit_prefix(std::size_t graph, std::string_view factor);

 private:
  struct FactorInput {
    std::string name;
    std::size_t lags;
  };

  Tensor run_unit(std::size_t graph, const FactorInput& f, const timeseries::FactorSampleSet& batch) const;
  Tensor aggregate(std::span<const Tensor> nodes, Aggregator kind, const std::string& prefix) const;
  void add_param(const std::string& name, numerics::Shape shape, std::uint64_t& seed_state);
  void add_filled(const std::string& name, numerics::Shape shape, double value);

  STMetaConfig cfg_;
  timeseries::FactorSpec factors_;
  std::vector<FactorInput> active_;
  std::vector<GraphInput> graphs_;
  std::size_t locations_ = 0;
  ParamStore params_;
};

/// One column per lag: (S·n)×1 tensor of lag `l` of the named factor.
Tensor factor_lag_column(const timeseries::FactorSampleSet& batch, std::string_view factor, std::size_t lag);

// ---- checkpoints -----------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  std::string variant;
  std::size_t locations = 0;
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
};

/// JSON document: header fields then `params` as [{name, shape, values}].
void write_checkpoint(std::ostream& os, const STMetaModel& model);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const STMetaModel& model);
Checkpoint load_checkpoint(const std::string& path);
/// Copies values into the model; names and shapes must match exactly.
void restore(STMetaModel& model, const Checkpoint& ckpt);

}  // namespace stmeta::models
