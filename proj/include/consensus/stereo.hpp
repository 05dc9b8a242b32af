#ifndef CONSENSUS_STEREO_HPP
#define CONSENSUS_STEREO_HPP

#include "consensus/aggregate.hpp"
#include "consensus/grid.hpp"
#include "consensus/local_model.hpp"
#include "consensus/region_pyramid.hpp"
#include "consensus/sgm_seed.hpp"
#include "consensus/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace consensus {

struct StereoParams {
  double tau0 = 1.44;
  double lambda = 0.4;
  /// λ'₀ = λ · lambda0_ratio.
  double lambda0_ratio = 1.0 / 262144.0;
  double lambda_factor = 8.0;
  int lambda_interval = 6;
  int occlusion_iteration = 50;
  int post_occlusion_iterations = 30;
  bool occlusion_correction = true;
  int num_scales = 5;
  int finest_side = 4;
  /// Divisor applied to pixel coordinates in U(n); <= 0 selects the larger
  /// image dimension.
  double coord_scale = 0.0;
  int audit_every = 10;
  bool strict_deterministic = false;
  /// Iterations after which a copy of the consensus is kept.
  std::vector<int> snapshot_iterations;
  SgmParams sgm;

  int total_iterations() const {
    return occlusion_iteration + post_occlusion_iterations;
  }

  void validate() const {
    if (!(tau0 > 0) || !(lambda > 0) || !(lambda0_ratio > 0) ||
        lambda0_ratio > 1.0 || !(lambda_factor > 1.0) || lambda_interval < 1 ||
        occlusion_iteration < 1 || post_occlusion_iterations < 1 ||
        num_scales < 1 || finest_side < 2) {
      throw std::invalid_argument("StereoParams: invalid parameter values");
    }
  }

  SolverConfig solver_config() const {
    SolverConfig c;
    c.lambda_final = lambda;
    c.lambda0 = lambda * lambda0_ratio;
    c.lambda_factor = lambda_factor;
    c.lambda_interval = lambda_interval;
    c.max_iters = total_iterations();
    c.audit_every = audit_every;
    c.strict_deterministic = strict_deterministic;
    return c;
  }
};

/// D_p(θ) = Σ_{n∈p} w(n) (U(n)θ − Z_seed(n))², as (A_p, b_p, c_p) for every
/// region. Finest scale by window sums, coarser scales by child sums.
template <LocalModel Model>
  requires(Model::kOutputDim == 1)
std::vector<std::vector<DataQuadratic<Model::kParamDim>>> build_data_quadratics(
    const SeedField& seed, const Model& model, const RegionPyramid& pyramid,
    bool parallel = true) {
  constexpr int M = Model::kParamDim;
  if (!seed.z.same_shape(pyramid.width(), pyramid.height())) {
    throw std::invalid_argument("build_data_quadratics: seed size mismatch");
  }
  Grid<DataQuadratic<M>> per_pixel(pyramid.width(), pyramid.height());
  parallel_for(pyramid.height(), parallel, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < pyramid.width(); ++x) {
      const double w = seed.valid(x, y) ? seed.weight(x, y) : 0.0;
      DataQuadratic<M> q;
      if (w > 0.0) {
        const auto u = model.evaluate(x, y);
        const double z = seed.z(x, y);
        q.a.add_gram(u, w);
        q.b = w * z * u.transpose();
        q.c = w * z * z;
      }
      per_pixel(x, y) = q;
    }
  });
  return accumulate_up(pyramid, per_pixel, DataQuadratic<M>{}, parallel);
}

/// Per-region intensity variance and the count V_p of same-scale regions
/// that share a quadrant child with p and have strictly lower variance.
struct VarianceTable {
  std::vector<std::vector<double>> variance;
  std::vector<std::vector<int>> lower_sharers;
};

inline VarianceTable build_variance_table(const Image& left,
                                          const RegionPyramid& pyramid,
                                          bool parallel = true) {
  if (!left.same_shape(pyramid.width(), pyramid.height())) {
    throw std::invalid_argument("build_variance_table: image size mismatch");
  }
  Grid<Eigen::Vector2d> px(left.width(), left.height(), Eigen::Vector2d::Zero());
  for (int y = 0; y < left.height(); ++y)
    for (int x = 0; x < left.width(); ++x) {
      const double v = left(x, y);
      px(x, y) = Eigen::Vector2d(v, v * v);
    }
  const auto sums = accumulate_up(pyramid, px, Eigen::Vector2d::Zero().eval(),
                                  parallel);
  VarianceTable t;
  t.variance.resize(pyramid.num_scales());
  t.lower_sharers.resize(pyramid.num_scales());
  for (int k = 0; k < pyramid.num_scales(); ++k) {
    const double n = static_cast<double>(pyramid.side(k)) * pyramid.side(k);
    auto& var = t.variance[k];
    var.resize(sums[k].size());
    for (std::size_t i = 0; i < var.size(); ++i) {
      const double mean = sums[k][i](0) / n;
      var[i] = std::max(0.0, sums[k][i](1) / n - mean * mean);
    }
    const ScaleGeometry& g = pyramid.scale(k);
    t.lower_sharers[k].assign(g.count(), 0);
    if (k == 0) continue;
    const int s = pyramid.side(k - 1);
    parallel_for(g.grid_height, parallel, [&](std::ptrdiff_t yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < g.grid_width; ++x) {
        const double mine = var[g.index(x, y)];
        // Equal variances computed through different summation orders can
        // differ in the last bits; they must not count as lower.
        const double margin = 1e-9 * std::max(1.0, mine);
        int count = 0;
        for (int j = -1; j <= 1; ++j)
          for (int i = -1; i <= 1; ++i) {
            if (i == 0 && j == 0) continue;
            const int qx = x + i * s;
            const int qy = y + j * s;
            if (!g.has_anchor(qx, qy)) continue;
            if (var[g.index(qx, qy)] < mine - margin) ++count;
          }
        t.lower_sharers[k][g.index(x, y)] = count;
      }
    });
  }
  return t;
}

/// τ_p = τ₀ |p| max(0.5, exp(−0.25 V_p²)).
inline double outlier_cost(double tau0, int region_pixels, int lower_sharers) {
  const double v = lower_sharers;
  return tau0 * region_pixels * std::max(0.5, std::exp(-0.25 * v * v));
}

inline std::vector<std::vector<double>> build_outlier_costs(
    const Image& left, const RegionPyramid& pyramid, double tau0,
    bool parallel = true) {
  const VarianceTable t = build_variance_table(left, pyramid, parallel);
  std::vector<std::vector<double>> tau(pyramid.num_scales());
  for (int k = 0; k < pyramid.num_scales(); ++k) {
    const int area = pyramid.side(k) * pyramid.side(k);
    tau[k].resize(t.lower_sharers[k].size());
    for (std::size_t i = 0; i < tau[k].size(); ++i)
      tau[k][i] = outlier_cost(tau0, area, t.lower_sharers[k][i]);
  }
  return tau;
}

namespace stereo_detail {

/// Nearest valid position along a line of `n` samples for every index;
/// ties go to the smaller value. -1 when the line has no valid sample.
template <typename ValidFn, typename ValueFn>
std::vector<int> nearest_valid(int n, ValidFn valid, ValueFn value) {
  std::vector<int> left(n, -1), right(n, -1), out(n, -1);
  int last = -1;
  for (int i = 0; i < n; ++i) {
    if (valid(i)) last = i;
    left[i] = last;
  }
  last = -1;
  for (int i = n - 1; i >= 0; --i) {
    if (valid(i)) last = i;
    right[i] = last;
  }
  for (int i = 0; i < n; ++i) {
    const int l = left[i];
    const int r = right[i];
    if (l < 0) out[i] = r;
    else if (r < 0) out[i] = l;
    else if (i - l < r - i) out[i] = l;
    else if (r - i < i - l) out[i] = r;
    else out[i] = value(r) < value(l) ? r : l;
  }
  return out;
}

}  // namespace stereo_detail

/// Z0 from the seed: seed values on Ω, holes filled with the nearest valid
/// pixel on the same row (ties to the lower disparity); empty rows use the
/// nearest valid pixel in the column, then the median of all valid values.
inline SceneMap<PlanarDisparity> initialize_scene(const SeedField& seed) {
  const int w = seed.width();
  const int h = seed.height();
  std::vector<float> all;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (seed.valid(x, y)) all.push_back(seed.z(x, y));
  if (all.empty()) {
    throw std::invalid_argument("initialize_scene: seed has no valid pixels");
  }
  std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
  const double median = all[all.size() / 2];

  SceneMap<PlanarDisparity> scene(w, h);
  std::vector<std::uint8_t> row_filled(h, 0);
  for (int y = 0; y < h; ++y) {
    const auto near = stereo_detail::nearest_valid(
        w, [&](int x) { return seed.valid(x, y) != 0; },
        [&](int x) { return seed.z(x, y); });
    if (near[0] < 0) continue;
    row_filled[y] = 1;
    for (int x = 0; x < w; ++x) scene.z(x, y)(0) = seed.z(near[x], y);
  }
  for (int x = 0; x < w; ++x) {
    const auto near = stereo_detail::nearest_valid(
        h, [&](int y) { return seed.valid(x, y) != 0; },
        [&](int y) { return seed.z(x, y); });
    for (int y = 0; y < h; ++y) {
      if (row_filled[y]) continue;
      scene.z(x, y)(0) = near[y] >= 0 ? seed.z(x, near[y]) : median;
    }
  }
  return scene;
}

/// For pixels off Ω: Z(n) ← min(Z(n), seed value of the nearest valid
/// pixel on the same row, ties to the lower seed disparity). Rows without
/// valid pixels and pixels on Ω are left alone.
inline void occlusion_correct(SceneMap<PlanarDisparity>& scene,
                              const SeedField& seed, bool parallel = true) {
  if (!scene.z.same_shape(seed.z)) {
    throw std::invalid_argument("occlusion_correct: size mismatch");
  }
  const int w = seed.width();
  parallel_for(seed.height(), parallel, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    const auto near = stereo_detail::nearest_valid(
        w, [&](int x) { return seed.valid(x, y) != 0; },
        [&](int x) { return seed.z(x, y); });
    for (int x = 0; x < w; ++x) {
      if (seed.valid(x, y) || near[x] < 0) continue;
      double& z = scene.z(x, y)(0);
      z = std::min(z, static_cast<double>(seed.z(near[x], y)));
    }
  });
}

struct StereoDiagnostics {
  double seed_seconds = 0.0;
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
  std::size_t seed_valid = 0;
  std::size_t singular_updates = 0;
  /// Consensus right before and right after the occlusion correction.
  std::optional<Grid<float>> before_occlusion;
  std::optional<Grid<float>> after_occlusion;
  std::map<int, Grid<float>> snapshots;
};

struct StereoResult {
  Grid<float> disparity;
  Grid<std::int32_t> confidence;  // |J_n|
  std::vector<TraceRow> trace;
  RegionStates<PlanarDisparity> states;
  RegionPyramid pyramid;
  PlanarDisparity model;
  SeedField seed;
  StereoDiagnostics diagnostics;
};

inline Grid<float> to_disparity(const SceneMap<PlanarDisparity>& scene) {
  Grid<float> out(scene.width(), scene.height());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(scene.z[i](0));
  return out;
}

/// Full pipeline from an existing seed: data quadratics, outlier costs,
/// Z0, then the annealed solver with the occlusion hook.
inline StereoResult run_stereo_from_seed(const Image& left, SeedField seed,
                                         const StereoParams& params) {
  using Clock = std::chrono::steady_clock;
  params.validate();
  if (!left.same_shape(seed.z)) {
    throw std::invalid_argument("run_stereo: seed and image sizes differ");
  }
  const bool par = !params.strict_deterministic;
  const auto t0 = Clock::now();
  StereoResult res;
  res.pyramid = build_pyramid(left.width(), left.height(), params.num_scales,
                              params.finest_side);
  res.model = make_planar_disparity(
      params.coord_scale > 0 ? params.coord_scale
                             : std::max(left.width(), left.height()));
  auto states = make_region_states(res.pyramid, res.model, par);
  auto data = build_data_quadratics(seed, res.model, res.pyramid, par);
  auto tau = build_outlier_costs(left, res.pyramid, params.tau0, par);
  for (int k = 0; k < res.pyramid.num_scales(); ++k) {
    states.scales[k].data = std::move(data[k]);
    states.scales[k].tau = std::move(tau[k]);
  }
  const SceneMap<PlanarDisparity> z0 = initialize_scene(seed);
  const auto t1 = Clock::now();

  std::vector<IterationHook<PlanarDisparity>> hooks;
  StereoDiagnostics& diag = res.diagnostics;
  std::vector<int> snaps = params.snapshot_iterations;
  hooks.push_back([&diag, snaps](int it, SceneMap<PlanarDisparity>& scene,
                                 const RegionStates<PlanarDisparity>&) {
    if (std::find(snaps.begin(), snaps.end(), it) != snaps.end())
      diag.snapshots[it] = to_disparity(scene);
  });
  if (params.occlusion_correction) {
    hooks.push_back([&diag, &seed, &params, par](
                        int it, SceneMap<PlanarDisparity>& scene,
                        const RegionStates<PlanarDisparity>&) {
      if (it != params.occlusion_iteration) return;
      diag.before_occlusion = to_disparity(scene);
      occlusion_correct(scene, seed, par);
      diag.after_occlusion = to_disparity(scene);
    });
  }
  auto run_res = run(params.solver_config(), res.pyramid, res.model,
                     std::move(states), z0.z, hooks);
  const auto t2 = Clock::now();

  res.disparity = to_disparity(run_res.scene);
  res.confidence = run_res.scene.count;
  res.trace = std::move(run_res.trace);
  res.states = std::move(run_res.states);
  diag.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
  diag.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  diag.seed_valid = seed.valid_count();
  diag.singular_updates = res.states.singular_updates;
  res.seed = std::move(seed);
  return res;
}

inline StereoResult run_stereo(const Image& left, const Image& right,
                               const StereoParams& params) {
  const auto t0 = std::chrono::steady_clock::now();
  SgmParams sgm = params.sgm;
  if (params.strict_deterministic) sgm.parallel = false;
  SeedField seed = compute_seed(left, right, sgm);
  const double seed_s = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
  StereoResult r = run_stereo_from_seed(left, std::move(seed), params);
  r.diagnostics.seed_seconds = seed_s;
  return r;
}

}  // namespace consensus

#endif  // CONSENSUS_STEREO_HPP
