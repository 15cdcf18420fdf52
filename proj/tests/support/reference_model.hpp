#pragma once

// Straight-line transcription of the STMeta/TMeta forward pass with plain
// loops over std::vector. Shares no code with the library beyond reading
// parameter values by name and the λ_max estimate of each Laplacian bundle.

#include <cmath>
#include <string>
#include <vector>

#include "stmeta/graphkit.hpp"
#include "stmeta/models.hpp"
#include "stmeta/timeseries.hpp"

namespace stmeta::testing::ref {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major: m[r][c]

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double leaky(double x) { return x >= 0.0 ? x : 0.2 * x; }

inline Mat to_mat(const numerics::Tensor& t) {
  Mat m(t.rows(), Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  }
  return m;
}

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, Vec(c, 0.0)); }

inline Mat mm(const Mat& a, const Mat& b) {
  Mat out = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    }
  }
  return out;
}

inline Mat plus(const Mat& a, const Mat& b) {
  Mat out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[0].size(); ++j) out[i][j] += b[i][j];
  }
  return out;
}

inline Vec vm(const Vec& v, const Mat& m) {
  Vec out(m[0].size(), 0.0);
  for (std::size_t k = 0; k < v.size(); ++k) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += v[k] * m[k][j];
  }
  return out;
}

/// Chebyshev terms of the scaled normalized Laplacian for the given λ_max.
inline std::vector<Mat> chebyshev_terms(const graphkit::RelationGraph& g, double lambda_max, std::size_t order) {
  const std::size_t n = g.n;
  Vec deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) deg[i] += g.has_edge(i, j) ? 1.0 : 0.0;
  }
  Mat scaled = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double l = i == j ? 1.0 : 0.0;
      if (g.has_edge(i, j)) l -= 1.0 / std::sqrt(deg[i] * deg[j]);
      scaled[i][j] = 2.0 * l / lambda_max - (i == j ? 1.0 : 0.0);
    }
  }
  Mat eye = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) eye[i][i] = 1.0;
  std::vector<Mat> t{eye};
  if (order >= 1) t.push_back(scaled);
  for (std::size_t k = 2; k <= order; ++k) {
    Mat next = mm(scaled, t[k - 1]);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) next[i][j] = 2.0 * next[i][j] - t[k - 2][i][j];
    }
    t.push_back(next);
  }
  return t;
}

/// Powers 0..order of D^{-1}A (rows of isolated nodes are zero).
inline std::vector<Mat> random_walk_powers(const graphkit::RelationGraph& g, std::size_t order) {
  const std::size_t n = g.n;
  Mat p = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += g.has_edge(i, j) ? 1.0 : 0.0;
    for (std::size_t j = 0; j < n; ++j) p[i][j] = (d > 0 && g.has_edge(i, j)) ? 1.0 / d : 0.0;
  }
  Mat eye = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) eye[i][i] = 1.0;
  std::vector<Mat> out{eye};
  for (std::size_t k = 1; k <= order; ++k) out.push_back(mm(p, out.back()));
  return out;
}

/// Single-node-set GAL written out with plain loops.
inline Vec gal(const std::vector<Vec>& nodes, const std::vector<Mat>& w, const std::vector<Vec>& a) {
  const std::size_t count = nodes.size();
  const std::size_t f_out = w[0][0].size();
  Vec result(f_out, 0.0);
  for (std::size_t m = 0; m < w.size(); ++m) {
    std::vector<Vec> proj;
    for (const auto& h : nodes) proj.push_back(vm(h, w[m]));
    for (std::size_t i = 0; i < count; ++i) {
      Vec e(count);
      for (std::size_t j = 0; j < count; ++j) {
        double v = 0.0;
        for (std::size_t k = 0; k < f_out; ++k) v += a[m][k] * proj[i][k] + a[m][f_out + k] * proj[j][k];
        e[j] = v;
      }
      double mx = e[0];
      for (double v : e) mx = std::max(mx, v);
      double z = 0.0;
      for (double v : e) z += std::exp(v - mx);
      for (std::size_t k = 0; k < f_out; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < count; ++j) acc += std::exp(e[j] - mx) / z * proj[j][k];
        result[k] += leaky(acc) / static_cast<double>(count * w.size());
      }
    }
  }
  return result;
}

class ReferenceModel {
 public:
  explicit ReferenceModel(const models::STMetaModel& model) : model_(model) {}

  /// Predictions in row order s·n + i.
  Vec forward(const timeseries::FactorSampleSet& b) const {
    const auto& cfg = model_.config();
    const std::size_t n = model_.locations();
    std::vector<std::string> factors;
    if (model_.factors().closeness) factors.push_back("closeness");
    if (model_.factors().daily) factors.push_back("daily");
    if (model_.factors().weekly) factors.push_back("weekly");
    const std::size_t units = cfg.temporal_only() ? 1 : model_.graphs().size();

    Vec out;
    for (std::size_t s = 0; s < b.samples; ++s) {
      std::vector<std::vector<Vec>> per_graph(units, std::vector<Vec>(n));  // [g][i] → F'
      for (std::size_t g = 0; g < units; ++g) {
        std::vector<Mat> reps;
        for (const auto& f : factors) reps.push_back(run_unit(g, f, b, s));
        const std::string prefix = cfg.temporal_only() ? std::string("temporal") : "g" + std::to_string(g) + ".temporal";
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<Vec> nodes;
          for (const auto& r : reps) nodes.push_back(r[i]);
          per_graph[g][i] = aggregate(nodes, prefix, cfg.temporal == models::Aggregator::concat);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        Vec z = per_graph[0][i];
        if (units >= 2) {
          std::vector<Vec> nodes;
          for (std::size_t g = 0; g < units; ++g) nodes.push_back(per_graph[g][i]);
          z = aggregate(nodes, "spatial", false);
        }
        out.push_back(head(z));
      }
    }
    return out;
  }

 private:
  Mat p(const std::string& name) const { return to_mat(model_.params().get(name)); }
  Vec row(const std::string& name) const { return p(name)[0]; }
  Vec column(const std::string& name) const {
    Vec v;
    for (const auto& r : p(name)) v.push_back(r[0]);
    return v;
  }

  Vec lag_values(const timeseries::FactorSampleSet& b, const std::string& f, std::size_t s, std::size_t l) const {
    Vec x(b.locations);
    for (std::size_t i = 0; i < b.locations; ++i) {
      if (f == "closeness") x[i] = b.closeness(s, i, l);
      if (f == "daily") x[i] = b.daily(s, i, l);
      if (f == "weekly") x[i] = b.weekly(s, i, l);
    }
    return x;
  }

  std::size_t lags_of(const std::string& f) const {
    if (f == "closeness") return model_.factors().closeness;
    if (f == "daily") return model_.factors().daily;
    return model_.factors().weekly;
  }

  Mat run_unit(std::size_t g, const std::string& f, const timeseries::FactorSampleSet& b, std::size_t s) const {
    const auto& cfg = model_.config();
    const std::size_t n = model_.locations(), H = cfg.hidden_units, K = cfg.cheb_order;
    Mat h = zeros(n, H), c = zeros(n, H);
    if (cfg.unit == models::STUnit::dcgru) {
      const auto powers = random_walk_powers(model_.graphs()[g].graph, K);
      const std::string pre = models::STMetaModel::unit_prefix(g, f) + ".dcgru";
      for (std::size_t l = 0; l < lags_of(f); ++l) {
        const Vec x = lag_values(b, f, s, l);
        Mat z(n);
        for (std::size_t i = 0; i < n; ++i) {
          z[i] = {x[i]};
          z[i].insert(z[i].end(), h[i].begin(), h[i].end());
        }
        Mat gates = diffuse(z, powers, pre + ".gate_fwd", pre + ".gate_rev", row(pre + ".gate_b"));
        Mat zc(n);
        for (std::size_t i = 0; i < n; ++i) {
          zc[i] = {x[i]};
          for (std::size_t k = 0; k < H; ++k) zc[i].push_back(sigmoid(gates[i][H + k]) * h[i][k]);
        }
        Mat cand = diffuse(zc, powers, pre + ".cand_fwd", pre + ".cand_rev", row(pre + ".cand_b"));
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < H; ++k) {
            const double u = sigmoid(gates[i][k]);
            h[i][k] = u * h[i][k] + (1.0 - u) * std::tanh(cand[i][k]);
          }
        }
      }
      return h;
    }

    std::vector<Mat> cheb;
    std::vector<Mat> wx, wh;
    Vec bias;
    if (cfg.temporal_only()) {
      Mat eye = zeros(n, n);
      for (std::size_t i = 0; i < n; ++i) eye[i][i] = 1.0;
      cheb = {eye};
      wx = {p(f + ".lstm.wx")};
      wh = {p(f + ".lstm.wh")};
      bias = row(f + ".lstm.b");
    } else {
      cheb = chebyshev_terms(model_.graphs()[g].graph, model_.graphs()[g].laplacian.lambda_max, K);
      const std::string pre = models::STMetaModel::unit_prefix(g, f) + ".gclstm";
      for (std::size_t k = 0; k <= K; ++k) {
        wx.push_back(p(pre + ".wx." + std::to_string(k)));
        wh.push_back(p(pre + ".wh." + std::to_string(k)));
      }
      bias = row(pre + ".b");
    }
    for (std::size_t l = 0; l < lags_of(f); ++l) {
      const Vec x = lag_values(b, f, s, l);
      Mat xm(n);
      for (std::size_t i = 0; i < n; ++i) xm[i] = {x[i]};
      Mat gates = zeros(n, 4 * H);
      for (std::size_t k = 0; k < cheb.size(); ++k) {
        gates = plus(gates, mm(mm(cheb[k], xm), wx[k]));
        gates = plus(gates, mm(mm(cheb[k], h), wh[k]));
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < H; ++k) {
          const double ig = sigmoid(gates[i][k] + bias[k]);
          const double fg = sigmoid(gates[i][H + k] + bias[H + k]);
          const double og = sigmoid(gates[i][2 * H + k] + bias[2 * H + k]);
          const double cg = std::tanh(gates[i][3 * H + k] + bias[3 * H + k]);
          c[i][k] = fg * c[i][k] + ig * cg;
          h[i][k] = og * std::tanh(c[i][k]);
        }
      }
    }
    return h;
  }

  Mat diffuse(const Mat& z, const std::vector<Mat>& powers, const std::string& fwd, const std::string& rev,
              const Vec& bias) const {
    Mat out = zeros(z.size(), bias.size());
    for (std::size_t k = 0; k < powers.size(); ++k) {
      const Mat pz = mm(powers[k], z);
      out = plus(out, mm(pz, p(fwd + "." + std::to_string(k))));
      out = plus(out, mm(pz, p(rev + "." + std::to_string(k))));
    }
    for (auto& r : out) {
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
    }
    return out;
  }

  Vec aggregate(const std::vector<Vec>& nodes, const std::string& prefix, bool concat) const {
    if (concat) {
      Vec joined;
      for (const auto& v : nodes) joined.insert(joined.end(), v.begin(), v.end());
      Vec out = vm(joined, p(prefix + ".dense.w"));
      const Vec b = row(prefix + ".dense.b");
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = leaky(out[k] + b[k]);
      return out;
    }
    std::vector<Mat> w;
    std::vector<Vec> a;
    for (std::size_t m = 0; m < model_.config().heads; ++m) {
      w.push_back(p(prefix + ".gal.w." + std::to_string(m)));
      a.push_back(column(prefix + ".gal.a." + std::to_string(m)));
    }
    return gal(nodes, w, a);
  }

  double head(const Vec& z) const {
    auto layer = [&](const Vec& in, const std::string& name, bool act) {
      Vec out = vm(in, p(name + ".w"));
      const Vec b = row(name + ".b");
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = act ? leaky(out[k] + b[k]) : out[k] + b[k];
      return out;
    };
    return layer(layer(layer(z, "head.dense1", true), "head.dense2", true), "head.out", false)[0];
  }

  const models::STMetaModel& model_;
};

}  // namespace stmeta::testing::ref
