#ifndef CONSENSUS_SOLVER_HPP
#define CONSENSUS_SOLVER_HPP

#include "consensus/aggregate.hpp"
#include "consensus/grid.hpp"
#include "consensus/local_model.hpp"
#include "consensus/parallel.hpp"
#include "consensus/region_pyramid.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace consensus {

/// D(θ) = θᵀAθ − 2bᵀθ + c.
template <int N>
struct DataQuadratic {
  SymMatrix<N> a;
  Vec<N> b = Vec<N>::Zero();
  double c = 0.0;

  double operator()(const Vec<N>& theta) const {
    return a.quadratic(theta) - 2.0 * b.dot(theta) + c;
  }

  DataQuadratic& operator+=(const DataQuadratic& o) {
    a += o.a;
    b += o.b;
    c += o.c;
    return *this;
  }
};

/// Scene map Z over the pixel grid plus the consensus degree |J_n|.
/// Pixels with count 0 carry a held value, not a consensus.
template <LocalModel Model>
struct SceneMap {
  Grid<ValueVec<Model>> z;
  Grid<std::int32_t> count;

  SceneMap() = default;
  SceneMap(int width, int height)
      : z(width, height, ValueVec<Model>::Zero()), count(width, height, 0) {}

  int width() const { return z.width(); }
  int height() const { return z.height(); }
  bool defined(int x, int y) const { return count(x, y) > 0; }
};

/// Variables and precomputed terms for the regions of one scale, stored as
/// parallel arrays indexed by ScaleGeometry::index.
template <LocalModel Model>
struct ScaleState {
  static constexpr int M = Model::kParamDim;

  std::vector<Vec<M>> theta;
  std::vector<std::uint8_t> inlier;
  std::vector<Vec<M>> phi;
  std::vector<double> e;
  std::vector<Vec<M>> theta_plus;
  std::vector<std::int32_t> i_plus;
  std::vector<SymMatrix<M>> moment;  // Q_p
  std::vector<DataQuadratic<M>> data;
  std::vector<double> tau;
  std::vector<Ldl<M>> factor;          // of A_p + λ'Q_p
  std::vector<std::uint8_t> factor_ok;  // 0 when A_p + λ'Q_p is singular

  std::size_t size() const { return theta.size(); }
};

template <LocalModel Model>
struct RegionStates {
  std::vector<ScaleState<Model>> scales;
  /// λ' the cached factorizations were built for; NaN means none.
  double factor_lambda = std::numeric_limits<double>::quiet_NaN();
  std::size_t singular_updates = 0;

  int num_scales() const { return static_cast<int>(scales.size()); }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& s : scales) n += s.size();
    return n;
  }
};

/// Q_p for every region: explicit sums at scale 0, child sums above.
template <LocalModel Model>
std::vector<std::vector<RegionMoment<Model>>> compute_moments(
    const RegionPyramid& pyramid, const Model& model, bool parallel = true) {
  Grid<RegionMoment<Model>> per_pixel(pyramid.width(), pyramid.height());
  parallel_for(pyramid.height(), parallel, [&](std::ptrdiff_t y) {
    for (int x = 0; x < pyramid.width(); ++x) {
      RegionMoment<Model> q;
      q.add_gram(model.evaluate(x, static_cast<int>(y)));
      per_pixel(x, static_cast<int>(y)) = q;
    }
  });
  return accumulate_up(pyramid, per_pixel, RegionMoment<Model>{}, parallel);
}

/// Allocates region state for every region with zero data costs, unit τ,
/// precomputed moments, θ = 0 and I = 1.
template <LocalModel Model>
RegionStates<Model> make_region_states(const RegionPyramid& pyramid,
                                       const Model& model,
                                       bool parallel = true) {
  constexpr int M = Model::kParamDim;
  RegionStates<Model> st;
  auto moments = compute_moments(pyramid, model, parallel);
  st.scales.resize(pyramid.num_scales());
  for (int k = 0; k < pyramid.num_scales(); ++k) {
    const std::size_t n = pyramid.scale(k).count();
    ScaleState<Model>& s = st.scales[k];
    s.theta.assign(n, Vec<M>::Zero());
    s.inlier.assign(n, 1);
    s.phi.assign(n, Vec<M>::Zero());
    s.e.assign(n, 0.0);
    s.theta_plus.assign(n, Vec<M>::Zero());
    s.i_plus.assign(n, 0);
    s.moment = std::move(moments[k]);
    s.data.assign(n, DataQuadratic<M>{});
    s.tau.assign(n, 1.0);
    s.factor.assign(n, Ldl<M>{});
    s.factor_ok.assign(n, 0);
  }
  return st;
}

/// φ_p and e_p for a scene map, computed hierarchically.
template <LocalModel Model>
struct ConsistencyTerms {
  std::vector<std::vector<ParamVec<Model>>> phi;
  std::vector<std::vector<double>> e;
};

template <LocalModel Model>
ConsistencyTerms<Model> consistency_terms(const RegionPyramid& pyramid,
                                          const Model& model,
                                          const Grid<ValueVec<Model>>& z,
                                          bool parallel = true) {
  constexpr int M = Model::kParamDim;
  Grid<Vec<M>> g(pyramid.width(), pyramid.height(), Vec<M>::Zero());
  Grid<double> sq(pyramid.width(), pyramid.height(), 0.0);
  parallel_for(pyramid.height(), parallel, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < pyramid.width(); ++x) {
      const auto& v = z(x, y);
      g(x, y) = model.evaluate(x, y).transpose() * v;
      sq(x, y) = v.squaredNorm();
    }
  });
  ConsistencyTerms<Model> t;
  t.phi = accumulate_up(pyramid, g, Vec<M>::Zero().eval(), parallel);
  t.e = accumulate_up(pyramid, sq, 0.0, parallel);
  return t;
}

/// Up-sweep: refresh φ_p, e_p of every region from Z.
template <LocalModel Model>
void upsweep(const RegionPyramid& pyramid, const Model& model,
             const SceneMap<Model>& scene, RegionStates<Model>& states,
             bool parallel = true) {
  auto t = consistency_terms(pyramid, model, scene.z, parallel);
  for (int k = 0; k < states.num_scales(); ++k) {
    states.scales[k].phi = std::move(t.phi[k]);
    states.scales[k].e = std::move(t.e[k]);
  }
}

/// C_p(θ, Z) = θᵀQθ − 2φᵀθ + e.
template <int N>
double consistency_cost(const SymMatrix<N>& q, const Vec<N>& phi, double e,
                        const Vec<N>& theta) {
  return q.quadratic(theta) - 2.0 * phi.dot(theta) + e;
}

template <int N>
struct RegionUpdate {
  Vec<N> theta;
  bool inlier = false;
  double fit = 0.0;
  bool singular = false;
};

/// Minimizes D_p(θ) + λ'C_p(θ, Z) and declares the region an outlier iff
/// the minimum exceeds τ_p. `cache` is the factorization of A_p + λ'Q_p; a
/// disengaged cache means the system is singular, in which case the region
/// becomes an outlier and keeps `previous_theta`.
template <int N>
RegionUpdate<N> update_region(const DataQuadratic<N>& data,
                              const SymMatrix<N>& moment, const Vec<N>& phi,
                              double e, double tau, double lambda,
                              const std::optional<Ldl<N>>& cache,
                              const Vec<N>& previous_theta) {
  RegionUpdate<N> r;
  if (!cache) {
    r.theta = previous_theta;
    r.inlier = false;
    r.singular = true;
    r.fit = std::numeric_limits<double>::infinity();
    return r;
  }
  r.theta = cache->solve(data.b + lambda * phi);
  r.fit = data(r.theta) + lambda * consistency_cost(moment, phi, e, r.theta);
  r.inlier = !(r.fit > tau);
  return r;
}

/// Factorizes A_p + λQ_p directly (no cache).
template <int N>
std::optional<Ldl<N>> factor_system(const DataQuadratic<N>& data,
                                    const SymMatrix<N>& moment,
                                    double lambda) {
  SymMatrix<N> sys = moment;
  sys *= lambda;
  sys += data.a;
  return Ldl<N>::factor(sys);
}

/// Rebuilds cached factorizations if λ' changed since they were built.
template <LocalModel Model>
void refresh_factorizations(RegionStates<Model>& states, double lambda,
                            bool parallel = true) {
  if (states.factor_lambda == lambda) return;
  for (auto& s : states.scales) {
    parallel_for(static_cast<std::ptrdiff_t>(s.size()), parallel,
                 [&](std::ptrdiff_t i) {
                   auto f = factor_system(s.data[i], s.moment[i], lambda);
                   s.factor_ok[i] = f.has_value();
                   if (f) s.factor[i] = *f;
                 });
  }
  states.factor_lambda = lambda;
}

/// Per-region (θ_p, I_p) update for all regions at once. Returns the number
/// of regions whose system was singular.
template <LocalModel Model>
std::size_t update_regions(RegionStates<Model>& states, double lambda,
                           bool parallel = true) {
  constexpr int M = Model::kParamDim;
  refresh_factorizations(states, lambda, parallel);
  std::size_t singular = 0;
  for (auto& s : states.scales) {
    parallel_for(static_cast<std::ptrdiff_t>(s.size()), parallel,
                 [&](std::ptrdiff_t i) {
                   std::optional<Ldl<M>> f;
                   if (s.factor_ok[i]) f = s.factor[i];
                   const auto r = update_region<M>(s.data[i], s.moment[i],
                                                   s.phi[i], s.e[i], s.tau[i],
                                                   lambda, f, s.theta[i]);
                   s.theta[i] = r.theta;
                   s.inlier[i] = r.inlier ? 1 : 0;
                 });
    for (std::uint8_t ok : s.factor_ok) singular += ok ? 0 : 1;
  }
  states.singular_updates += singular;
  return singular;
}

/// Down-sweep: θ⁺_p = θ_p I_p + Σ_{parents r} θ⁺_r, I⁺_p = I_p + Σ I⁺_r.
template <LocalModel Model>
void downsweep(const RegionPyramid& pyramid, RegionStates<Model>& states,
               bool parallel = true) {
  for (int k : pyramid.sweep_order_down()) {
    const ScaleGeometry& g = pyramid.scale(k);
    ScaleState<Model>& s = states.scales[k];
    const bool top = k + 1 >= pyramid.num_scales();
    const ScaleGeometry* up = top ? nullptr : &pyramid.scale(k + 1);
    const ScaleState<Model>* ps = top ? nullptr : &states.scales[k + 1];
    const int h = g.side;
    parallel_for(g.grid_height, parallel, [&](std::ptrdiff_t yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < g.grid_width; ++x) {
        const std::size_t i = g.index(x, y);
        auto tp = (s.inlier[i] ? s.theta[i] : ParamVec<Model>::Zero()).eval();
        std::int32_t ip = s.inlier[i];
        if (!top) {
          for (int b = 0; b < 2; ++b)
            for (int a = 0; a < 2; ++a) {
              const int px = x - a * h;
              const int py = y - b * h;
              if (!up->has_anchor(px, py)) continue;
              const std::size_t j = up->index(px, py);
              tp += ps->theta_plus[j];
              ip += ps->i_plus[j];
            }
        }
        s.theta_plus[i] = tp;
        s.i_plus[i] = ip;
      }
    });
  }
}

/// Consensus from the finest-scale augmented variables. Pixels covered by
/// no inlier keep their value from `scene`; all counts are overwritten.
template <LocalModel Model>
void reconstruct_consensus_inplace(const RegionPyramid& pyramid,
                                   const Model& model,
                                   const RegionStates<Model>& states,
                                   SceneMap<Model>& scene,
                                   bool parallel = true) {
  constexpr int M = Model::kParamDim;
  const ScaleGeometry& g = pyramid.scale(0);
  const ScaleState<Model>& s = states.scales[0];
  Grid<Vec<M>> tp(g.grid_width, g.grid_height, Vec<M>::Zero().eval());
  Grid<std::int32_t> ip(g.grid_width, g.grid_height);
  tp.values() = s.theta_plus;
  ip.values() = s.i_plus;
  const auto theta_sum = covering_sum(tp, g.side, pyramid.width(),
                                      pyramid.height(), Vec<M>::Zero().eval(),
                                      parallel);
  const auto count = covering_sum(ip, g.side, pyramid.width(),
                                  pyramid.height(), std::int32_t{0}, parallel);
  parallel_for(pyramid.height(), parallel, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < pyramid.width(); ++x) {
      const std::int32_t c = count(x, y);
      scene.count(x, y) = c;
      if (c > 0) {
        scene.z(x, y) =
            model.evaluate(x, y) * theta_sum(x, y) / static_cast<double>(c);
      }
    }
  });
}

template <LocalModel Model>
SceneMap<Model> reconstruct_consensus(const RegionPyramid& pyramid,
                                      const Model& model,
                                      const RegionStates<Model>& states,
                                      const SceneMap<Model>& previous,
                                      bool parallel = true) {
  SceneMap<Model> out = previous;
  reconstruct_consensus_inplace(pyramid, model, states, out, parallel);
  return out;
}

struct CostBreakdown {
  double outlier = 0.0;      // Σ_{I_p=0} τ_p
  double data = 0.0;         // Σ_{I_p=1} D_p(θ_p)
  double consistency = 0.0;  // Σ_{I_p=1} C_p(θ_p, Z), unweighted
  double lambda = 0.0;
  double total() const { return outlier + data + lambda * consistency; }
};

/// L′({I_p, θ_p}, Z) through the quadratic form of C_p, with φ_p and e_p
/// recomputed from `z` (the states' own φ/e are left untouched).
template <LocalModel Model>
CostBreakdown evaluate_cost_Lprime(const RegionPyramid& pyramid,
                                   const Model& model,
                                   const RegionStates<Model>& states,
                                   const Grid<ValueVec<Model>>& z,
                                   double lambda, bool parallel = true) {
  const auto t = consistency_terms(pyramid, model, z, parallel);
  CostBreakdown cb;
  cb.lambda = lambda;
  for (int k = 0; k < states.num_scales(); ++k) {
    const ScaleState<Model>& s = states.scales[k];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s.inlier[i]) {
        cb.outlier += s.tau[i];
        continue;
      }
      cb.data += s.data[i](s.theta[i]);
      cb.consistency +=
          consistency_cost(s.moment[i], t.phi[k][i], t.e[k][i], s.theta[i]);
    }
  }
  return cb;
}

/// L({I_p, θ_p}): outlier costs, data costs and λ Σ_n |J_n| Var over the
/// inlier predictions at n (population variance). Computed as L′ at the
/// consensus, which is the same quantity.
template <LocalModel Model>
CostBreakdown evaluate_cost_L(const RegionPyramid& pyramid, const Model& model,
                              RegionStates<Model> states, double lambda,
                              bool parallel = true) {
  downsweep(pyramid, states, parallel);
  SceneMap<Model> consensus(pyramid.width(), pyramid.height());
  reconstruct_consensus_inplace(pyramid, model, states, consensus, parallel);
  return evaluate_cost_Lprime(pyramid, model, states, consensus.z, lambda,
                              parallel);
}

/// Cost of the current states assuming θ⁺/I⁺ are fresh and `scene` holds
/// their consensus. Avoids the copy done by evaluate_cost_L.
template <LocalModel Model>
CostBreakdown audit_cost(const RegionPyramid& pyramid, const Model& model,
                         const RegionStates<Model>& states,
                         const SceneMap<Model>& consensus, double lambda,
                         bool parallel = true) {
  return evaluate_cost_Lprime(pyramid, model, states, consensus.z, lambda,
                              parallel);
}

struct SolverConfig {
  double lambda_final = 0.4;
  double lambda0 = 0.4 / 262144.0;  // λ / 2^18
  double lambda_factor = 8.0;
  int lambda_interval = 6;
  int max_iters = 80;
  /// Evaluate L every `audit_every` iterations (and at the last one);
  /// 1 audits every iteration, 0 only at the end.
  int audit_every = 10;
  /// Single-threaded, fixed summation order.
  bool strict_deterministic = false;

  void validate() const {
    if (!(lambda_final > 0.0) || !(lambda0 > 0.0)) {
      throw std::invalid_argument("SolverConfig: weights must be positive");
    }
    if (lambda0 > lambda_final) {
      throw std::invalid_argument("SolverConfig: lambda0 > lambda_final");
    }
    if (!(lambda_factor > 1.0)) {
      throw std::invalid_argument("SolverConfig: lambda_factor must be > 1");
    }
    if (lambda_interval < 1) {
      throw std::invalid_argument("SolverConfig: lambda_interval must be >= 1");
    }
    if (max_iters < 0) {
      throw std::invalid_argument("SolverConfig: max_iters must be >= 0");
    }
  }
};

struct TraceRow {
  int iteration = 0;
  double lambda_prime = 0.0;
  /// L with the final λ; NaN when not audited this iteration.
  double cost = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> outliers_per_scale;
};

inline void write_trace_csv(std::ostream& os,
                            const std::vector<TraceRow>& trace) {
  std::size_t scales = trace.empty() ? 0 : trace.front().outliers_per_scale.size();
  os << "iteration,lambda_prime,L";
  for (std::size_t k = 0; k < scales; ++k) os << ",outliers_scale" << (k + 1);
  os << '\n';
  os.precision(17);
  for (const auto& r : trace) {
    os << r.iteration << ',' << r.lambda_prime << ',';
    if (!std::isnan(r.cost)) os << r.cost;
    for (std::size_t n : r.outliers_per_scale) os << ',' << n;
    os << '\n';
  }
}

/// Called after each iteration's consensus step, before λ' is updated.
/// Hooks may modify the scene map.
template <LocalModel Model>
using IterationHook = std::function<void(int iteration, SceneMap<Model>& scene,
                                         const RegionStates<Model>& states)>;

template <LocalModel Model>
struct RunResult {
  SceneMap<Model> scene;
  RegionStates<Model> states;
  std::vector<TraceRow> trace;
  double final_lambda_prime = 0.0;
};

template <LocalModel Model>
std::vector<std::size_t> outliers_per_scale(const RegionStates<Model>& s) {
  std::vector<std::size_t> out;
  for (const auto& sc : s.scales) {
    std::size_t n = 0;
    for (std::uint8_t i : sc.inlier) n += i ? 0 : 1;
    out.push_back(n);
  }
  return out;
}

/// Alternating minimization. `states` must carry data quadratics, τ and
/// moments (see make_region_states); `initial` supplies Z0 everywhere.
template <LocalModel Model>
RunResult<Model> run(const SolverConfig& config, const RegionPyramid& pyramid,
                     const Model& model, RegionStates<Model> states,
                     const Grid<ValueVec<Model>>& initial,
                     const std::vector<IterationHook<Model>>& hooks = {}) {
  config.validate();
  if (!initial.same_shape(pyramid.width(), pyramid.height())) {
    throw std::invalid_argument("run: initial scene map has wrong size");
  }
  const bool par = !config.strict_deterministic;
  RunResult<Model> res;
  res.scene = SceneMap<Model>(pyramid.width(), pyramid.height());
  res.scene.z = initial;
  for (auto& s : states.scales) std::fill(s.inlier.begin(), s.inlier.end(), 1);

  double lambda_prime = config.lambda0;
  for (int it = 1; it <= config.max_iters; ++it) {
    upsweep(pyramid, model, res.scene, states, par);
    update_regions(states, lambda_prime, par);
    downsweep(pyramid, states, par);
    reconstruct_consensus_inplace(pyramid, model, states, res.scene, par);

    TraceRow row;
    row.iteration = it;
    row.lambda_prime = lambda_prime;
    row.outliers_per_scale = outliers_per_scale(states);
    const bool audit = it == config.max_iters ||
                       (config.audit_every > 0 && it % config.audit_every == 0);
    if (audit) {
      row.cost = audit_cost(pyramid, model, states, res.scene,
                            config.lambda_final, par)
                     .total();
    }
    res.trace.push_back(std::move(row));

    for (const auto& hook : hooks) hook(it, res.scene, states);

    if (it % config.lambda_interval == 0) {
      lambda_prime = std::min(lambda_prime * config.lambda_factor,
                              config.lambda_final);
    }
  }
  res.final_lambda_prime = lambda_prime;
  res.states = std::move(states);
  return res;
}

}  // namespace consensus

#endif  // CONSENSUS_SOLVER_HPP
