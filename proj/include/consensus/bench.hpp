#ifndef CONSENSUS_BENCH_HPP
#define CONSENSUS_BENCH_HPP

// Wall-clock comparison of one iteration's aggregation work (φ_p, e_p for
// every region plus the consensus map) done hierarchically versus by
// enumerating pixels and covering regions directly.

#include "consensus/local_model.hpp"
#include "consensus/oracle.hpp"
#include "consensus/region_pyramid.hpp"
#include "consensus/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace consensus {

struct SweepTiming {
  int width = 0;
  int height = 0;
  int num_scales = 0;
  double hierarchical_seconds = 0.0;
  double naive_seconds = 0.0;
  double max_rel_diff = 0.0;  // consensus and φ_p disagreement
  double speedup() const { return naive_seconds / hierarchical_seconds; }
};

/// Random planar-disparity state on a width×height image. Both paths run
/// single-threaded unless `parallel` is set.
inline SweepTiming time_sweeps(int width, int height, int num_scales,
                               std::uint32_t seed = 1, bool parallel = false) {
  using Clock = std::chrono::steady_clock;
  const auto model = make_planar_disparity(std::max(width, height));
  const auto pyr = build_pyramid(width, height, num_scales, 4);
  auto st = make_region_states(pyr, model, parallel);
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SceneMap<PlanarDisparity> scene(width, height);
  for (auto& v : scene.z) v(0) = 20.0 + 3.0 * g(rng);
  for (auto& s : st.scales)
    for (std::size_t i = 0; i < s.size(); ++i) {
      s.theta[i] << g(rng), g(rng), 20.0 + g(rng);
      s.inlier[i] = u(rng) < 0.7;
    }

  SweepTiming t;
  t.width = width;
  t.height = height;
  t.num_scales = num_scales;

  auto t0 = Clock::now();
  upsweep(pyr, model, scene, st, parallel);
  downsweep(pyr, st, parallel);
  const auto fast = reconstruct_consensus(pyr, model, st, scene, parallel);
  t.hierarchical_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  t0 = Clock::now();
  std::vector<std::vector<Vec<3>>> phi(num_scales);
  std::vector<std::vector<double>> es(num_scales);
  for (int k = 0; k < num_scales; ++k) {
    const ScaleGeometry& geo = pyr.scale(k);
    phi[k].resize(geo.count());
    es[k].resize(geo.count());
    parallel_for(geo.grid_height, parallel, [&](std::ptrdiff_t ay) {
      for (int ax = 0; ax < geo.grid_width; ++ax) {
        Vec<3> p = Vec<3>::Zero();
        double e = 0.0;
        for (int y = static_cast<int>(ay); y < ay + geo.side; ++y)
          for (int x = ax; x < ax + geo.side; ++x) {
            const double z = scene.z(x, y)(0);
            p += model.evaluate(x, y).transpose() * z;
            e += z * z;
          }
        phi[k][geo.index(ax, static_cast<int>(ay))] = p;
        es[k][geo.index(ax, static_cast<int>(ay))] = e;
      }
    });
  }
  const auto slow = oracle::naive_consensus(pyr, model, st, scene.z,
                                            oracle::Bounds::unbounded());
  t.naive_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  const auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
  };
  for (std::size_t i = 0; i < fast.z.size(); ++i)
    t.max_rel_diff = std::max(t.max_rel_diff, rel(fast.z[i](0), slow.z[i](0)));
  for (int k = 0; k < num_scales; ++k)
    for (std::size_t i = 0; i < phi[k].size(); ++i) {
      t.max_rel_diff = std::max(t.max_rel_diff, rel(es[k][i], st.scales[k].e[i]));
      for (int m = 0; m < 3; ++m)
        t.max_rel_diff = std::max(t.max_rel_diff, rel(phi[k][i](m), st.scales[k].phi[i](m)));
    }
  return t;
}

}  // namespace consensus

#endif  // CONSENSUS_BENCH_HPP
