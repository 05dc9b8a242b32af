#ifndef CONSENSUS_ORACLE_HPP
#define CONSENSUS_ORACLE_HPP

// Brute-force reference computations. Nothing in here uses the parent/child
// structure of the pyramid: every region is expanded to its explicit pixel
// list and every pixel enumerates all regions covering it. Sums run
// sequentially in row-major pixel order.

#include "consensus/grid.hpp"
#include "consensus/local_model.hpp"
#include "consensus/region_pyramid.hpp"
#include "consensus/solver.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace consensus::oracle {

/// Size guard so an accidental call on a full-size image does not stall CI.
struct Bounds {
  int max_width = 64;
  int max_height = 64;
  int max_scales = 3;

  static Bounds unbounded() { return {1 << 30, 1 << 30, 1 << 30}; }

  void check(const RegionPyramid& p) const {
    if (p.width() > max_width || p.height() > max_height ||
        p.num_scales() > max_scales) {
      throw std::invalid_argument(
          "oracle: instance too large for brute-force enumeration");
    }
  }
};

template <LocalModel Model>
struct DenseTerms {
  std::vector<std::vector<ParamVec<Model>>> phi;
  std::vector<std::vector<double>> e;
  std::vector<std::vector<RegionMoment<Model>>> moment;
};

/// φ_p, e_p and Q_p by literal summation over each region's pixels.
template <LocalModel Model>
DenseTerms<Model> naive_upsweep(const RegionPyramid& pyramid,
                                const Model& model,
                                const Grid<ValueVec<Model>>& z,
                                Bounds bounds = {}) {
  bounds.check(pyramid);
  DenseTerms<Model> t;
  const int scales = pyramid.num_scales();
  t.phi.resize(scales);
  t.e.resize(scales);
  t.moment.resize(scales);
  for (int k = 0; k < scales; ++k) {
    const ScaleGeometry& g = pyramid.scale(k);
    for (int ay = 0; ay < g.grid_height; ++ay)
      for (int ax = 0; ax < g.grid_width; ++ax) {
        ParamVec<Model> phi = ParamVec<Model>::Zero();
        double e = 0.0;
        RegionMoment<Model> q;
        for (const Pixel& n : pyramid.pixels({k, ax, ay})) {
          const auto u = model.evaluate(n.x, n.y);
          phi += u.transpose() * z(n.x, n.y);
          e += z(n.x, n.y).squaredNorm();
          q.add_gram(u);
        }
        t.phi[k].push_back(phi);
        t.e[k].push_back(e);
        t.moment[k].push_back(q);
      }
  }
  return t;
}

/// Z̄(n) and |J_n| by enumerating every covering region at every scale.
/// Pixels with no inlier keep the value from `previous`.
template <LocalModel Model>
SceneMap<Model> naive_consensus(const RegionPyramid& pyramid,
                                const Model& model,
                                const RegionStates<Model>& states,
                                const Grid<ValueVec<Model>>& previous,
                                Bounds bounds = {}) {
  bounds.check(pyramid);
  SceneMap<Model> out(pyramid.width(), pyramid.height());
  out.z = previous;
  for (int y = 0; y < pyramid.height(); ++y)
    for (int x = 0; x < pyramid.width(); ++x) {
      ValueVec<Model> sum = ValueVec<Model>::Zero();
      std::int32_t count = 0;
      const auto u = model.evaluate(x, y);
      for (const RegionId& r : pyramid.covering_regions({x, y})) {
        const std::size_t i = pyramid.scale(r.scale).index(r.x, r.y);
        if (!states.scales[r.scale].inlier[i]) continue;
        sum += u * states.scales[r.scale].theta[i];
        ++count;
      }
      out.count(x, y) = count;
      if (count > 0) out.z(x, y) = sum / static_cast<double>(count);
    }
  return out;
}

/// I⁺-style count Σ_{p ∋ n} I_p per pixel.
template <LocalModel Model>
Grid<std::int32_t> naive_inlier_count(const RegionPyramid& pyramid,
                                      const RegionStates<Model>& states,
                                      Bounds bounds = {}) {
  bounds.check(pyramid);
  Grid<std::int32_t> out(pyramid.width(), pyramid.height(), 0);
  for (int y = 0; y < pyramid.height(); ++y)
    for (int x = 0; x < pyramid.width(); ++x)
      for (const RegionId& r : pyramid.covering_regions({x, y}))
        out(x, y) +=
            states.scales[r.scale].inlier[pyramid.scale(r.scale).index(r.x, r.y)];
  return out;
}

struct NaiveCost {
  double outlier = 0.0;
  double data = 0.0;
  double variance = 0.0;  // Σ_n |J_n| Var[...]
  double lambda = 0.0;
  double total() const { return outlier + data + lambda * variance; }
};

/// L with the variance term evaluated per pixel over the enumerated J_n.
template <LocalModel Model>
NaiveCost naive_cost_L(const RegionPyramid& pyramid, const Model& model,
                       const RegionStates<Model>& states, double lambda,
                       Bounds bounds = {}) {
  bounds.check(pyramid);
  NaiveCost c;
  c.lambda = lambda;
  for (const auto& s : states.scales)
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.inlier[i]) c.data += s.data[i](s.theta[i]);
      else c.outlier += s.tau[i];
    }
  std::vector<ValueVec<Model>> preds;
  for (int y = 0; y < pyramid.height(); ++y)
    for (int x = 0; x < pyramid.width(); ++x) {
      preds.clear();
      const auto u = model.evaluate(x, y);
      for (const RegionId& r : pyramid.covering_regions({x, y})) {
        const std::size_t i = pyramid.scale(r.scale).index(r.x, r.y);
        if (states.scales[r.scale].inlier[i])
          preds.push_back(u * states.scales[r.scale].theta[i]);
      }
      if (preds.empty()) continue;
      ValueVec<Model> mean = ValueVec<Model>::Zero();
      for (const auto& p : preds) mean += p;
      mean /= static_cast<double>(preds.size());
      double var = 0.0;
      for (const auto& p : preds) var += (p - mean).squaredNorm();
      var /= static_cast<double>(preds.size());
      c.variance += static_cast<double>(preds.size()) * var;
    }
  return c;
}

/// L′ by direct pixel loops: Σ_{I_p=1} Σ_{n∈p} ‖U(n)θ_p − Z(n)‖².
template <LocalModel Model>
NaiveCost naive_cost_Lprime(const RegionPyramid& pyramid, const Model& model,
                            const RegionStates<Model>& states,
                            const Grid<ValueVec<Model>>& z, double lambda,
                            Bounds bounds = {}) {
  bounds.check(pyramid);
  NaiveCost c;
  c.lambda = lambda;
  for (int k = 0; k < pyramid.num_scales(); ++k) {
    const ScaleGeometry& g = pyramid.scale(k);
    const auto& s = states.scales[k];
    for (int ay = 0; ay < g.grid_height; ++ay)
      for (int ax = 0; ax < g.grid_width; ++ax) {
        const std::size_t i = g.index(ax, ay);
        if (!s.inlier[i]) {
          c.outlier += s.tau[i];
          continue;
        }
        c.data += s.data[i](s.theta[i]);
        for (const Pixel& n : pyramid.pixels({k, ax, ay}))
          c.variance +=
              (model.evaluate(n.x, n.y) * s.theta[i] - z(n.x, n.y)).squaredNorm();
      }
  }
  return c;
}

}  // namespace consensus::oracle

#endif  // CONSENSUS_ORACLE_HPP
