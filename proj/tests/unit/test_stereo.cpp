#include "consensus/oracle.hpp"
#include "consensus/stereo.hpp"
#include "consensus/synthetic.hpp"

#include <gtest/gtest.h>

using namespace consensus;

TEST(OutlierCost, Values) {
  EXPECT_NEAR(outlier_cost(1.44, 16, 0), 23.04, 1e-12);
  EXPECT_NEAR(outlier_cost(1.44, 16, 1) / 23.04, std::exp(-0.25), 1e-12);
  EXPECT_NEAR(std::exp(-0.25), 0.7788, 1e-4);
  EXPECT_NEAR(outlier_cost(1.44, 16, 2) / 23.04, 0.5, 1e-12);
  EXPECT_NEAR(outlier_cost(1.44, 16, 8) / 23.04, 0.5, 1e-12);
}

TEST(OutlierCost, ScaleRatioIsFour) {
  const Image flat(32, 32, 50.0f);
  const auto pyr = build_pyramid(32, 32, 3, 4);
  const auto tau = build_outlier_costs(flat, pyr, 1.44, false);
  for (int k = 0; k + 1 < 3; ++k) EXPECT_DOUBLE_EQ(tau[k + 1][0] / tau[k][0], 4.0);
}

TEST(VarianceTable, SharersAndStrictComparison) {
  // Uniform image: all variances equal, nobody counts.
  const auto pyr = build_pyramid(24, 24, 2, 4);
  const auto flat = build_variance_table(Image(24, 24, 9.0f), pyr, false);
  for (int v : flat.lower_sharers[1]) EXPECT_EQ(v, 0);
  for (int v : flat.lower_sharers[0]) EXPECT_EQ(v, 0);

  // Texture only in the right part: regions there see sharers to the left
  // with lower variance.
  Image img(24, 24, 0.0f);
  for (int y = 0; y < 24; ++y)
    for (int x = 12; x < 24; ++x) img(x, y) = ((x + y) % 2) * 100.0f;
  const auto t = build_variance_table(img, pyr, false);
  const auto& g = pyr.scale(1);
  EXPECT_EQ(t.lower_sharers[1][g.index(16, 8)], 0);  // all sharers textured too
  const int v = t.lower_sharers[1][g.index(12, 8)];
  EXPECT_EQ(v, 3);  // sharers at x = 8 overlap the flat half
  for (std::size_t i = 0; i < t.variance[1].size(); ++i) EXPECT_GE(t.variance[1][i], 0.0);
}

TEST(VarianceTable, MatchesDirectComputation) {
  const Image img = synthetic::texture(40, 40, 3);
  const auto pyr = build_pyramid(40, 40, 3, 4);
  const auto t = build_variance_table(img, pyr, false);
  for (int k = 0; k < 3; ++k) {
    const auto& g = pyr.scale(k);
    for (int ay = 0; ay < g.grid_height; ay += 5)
      for (int ax = 0; ax < g.grid_width; ax += 5) {
        double s = 0, s2 = 0;
        for (const auto& n : pyr.pixels({k, ax, ay})) {
          s += img(n.x, n.y);
          s2 += double(img(n.x, n.y)) * img(n.x, n.y);
        }
        const double n = g.side * g.side;
        EXPECT_NEAR(t.variance[k][g.index(ax, ay)], s2 / n - (s / n) * (s / n), 1e-6);
      }
  }
}

TEST(DataQuadratics, ZeroWeightRegionsAreEmpty) {
  SeedField seed(16, 16);
  const auto pyr = build_pyramid(16, 16, 2, 4);
  const auto q = build_data_quadratics(seed, make_planar_disparity(16.0), pyr, false);
  for (const auto& s : q)
    for (const auto& d : s) {
      EXPECT_EQ(d.a.max_abs(), 0.0);
      EXPECT_EQ(d.c, 0.0);
    }
}

TEST(DataQuadratics, PlanarSeedIsExactMinimizer) {
  const auto m = make_planar_disparity(32.0);
  const Vec<3> plane(2.0, 1.0, 12.0);
  SeedField seed(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      seed.z(x, y) = static_cast<float>((m.evaluate(x, y) * plane)(0));
      seed.valid(x, y) = 1;
      seed.weight(x, y) = 1.0f;
    }
  const auto pyr = build_pyramid(32, 32, 3, 4);
  const auto q = build_data_quadratics(seed, m, pyr, false);
  for (int k = 0; k < 3; ++k) {
    const auto& d = q[k][7];
    EXPECT_NEAR(d(plane), 0.0, 1e-3);
    const auto f = Ldl<3>::factor(d.a);
    ASSERT_TRUE(f);
    EXPECT_LT((f->solve(d.b) - plane).norm(), 1e-4);
  }
}

TEST(DataQuadratics, HierarchicalEqualsDirect) {
  const auto m = make_planar_disparity(32.0);
  SeedField seed = synthetic::noisy_seed(synthetic::TwoPlaneScene{32, 32, 16}.truth(), {}, 4);
  const auto pyr = build_pyramid(32, 32, 2, 4);
  const auto q = build_data_quadratics(seed, m, pyr, false);
  const RegionId r{1, 5, 9};
  DataQuadratic<3> direct;
  for (const auto& n : pyr.pixels(r)) {
    if (!seed.valid(n.x, n.y)) continue;
    const double w = seed.weight(n.x, n.y);
    const auto u = m.evaluate(n.x, n.y);
    direct.a.add_gram(u, w);
    direct.b += w * seed.z(n.x, n.y) * u.transpose();
    direct.c += w * double(seed.z(n.x, n.y)) * seed.z(n.x, n.y);
  }
  const auto& h = q[1][pyr.scale(1).index(5, 9)];
  EXPECT_LT((h.a.dense() - direct.a.dense()).cwiseAbs().maxCoeff(), 1e-10 * direct.a.max_abs());
  EXPECT_LT((h.b - direct.b).cwiseAbs().maxCoeff(), 1e-10 * direct.b.cwiseAbs().maxCoeff());
  EXPECT_NEAR(h.c, direct.c, 1e-10 * direct.c);
}

TEST(InitializeScene, FillRules) {
  SeedField seed(10, 3);
  // Row 0: valid 10 at x=1 and 30 at x=8; hole at x=3 is 2 from x=1.
  seed.valid(1, 0) = seed.valid(8, 0) = 1;
  seed.z(1, 0) = 10;
  seed.z(8, 0) = 30;
  // Row 1: equidistant 30 (x=2) and 10 (x=6) around x=4.
  seed.valid(2, 1) = seed.valid(6, 1) = 1;
  seed.z(2, 1) = 30;
  seed.z(6, 1) = 10;
  // Row 2 empty: column fallback.
  const auto scene = initialize_scene(classify_weights(seed));
  EXPECT_EQ(scene.z(3, 0)(0), 10.0);
  EXPECT_EQ(scene.z(6, 0)(0), 30.0);
  EXPECT_EQ(scene.z(4, 1)(0), 10.0);
  EXPECT_EQ(scene.z(2, 2)(0), 30.0);  // column 2 nearest valid is (2,1)
  EXPECT_EQ(scene.z(1, 2)(0), 10.0);  // column 1 nearest valid is (1,0)
  EXPECT_EQ(scene.z(0, 2)(0), 30.0);  // empty column: upper median of {10,10,30,30}
}

TEST(InitializeScene, FullSeedIsCopied) {
  const auto seed = synthetic::noisy_seed(synthetic::TwoPlaneScene{16, 8, 8}.truth(), {0.3, 0.0}, 1);
  const auto scene = initialize_scene(seed);
  for (std::size_t i = 0; i < seed.z.size(); ++i) EXPECT_EQ(scene.z[i](0), double(seed.z[i]));
  EXPECT_THROW(initialize_scene(SeedField(4, 4)), std::invalid_argument);
}

TEST(OcclusionCorrect, MinRule) {
  SeedField seed(6, 1);
  seed.valid(0, 0) = 1;
  seed.z(0, 0) = 12;
  SceneMap<PlanarDisparity> scene(6, 1);
  scene.z(1, 0)(0) = 25;
  scene.z(2, 0)(0) = 8;
  scene.z(0, 0)(0) = 40;  // on Ω: untouched
  occlusion_correct(scene, seed, false);
  EXPECT_EQ(scene.z(1, 0)(0), 12.0);
  EXPECT_EQ(scene.z(2, 0)(0), 8.0);
  EXPECT_EQ(scene.z(0, 0)(0), 40.0);
}

TEST(OcclusionCorrect, TieToLowerAndNoOps) {
  SeedField seed(5, 2);
  seed.valid(0, 0) = seed.valid(4, 0) = 1;
  seed.z(0, 0) = 20;
  seed.z(4, 0) = 6;
  SceneMap<PlanarDisparity> scene(5, 2);
  for (auto& v : scene.z) v(0) = 30;
  occlusion_correct(scene, seed, false);
  EXPECT_EQ(scene.z(2, 0)(0), 6.0);
  EXPECT_EQ(scene.z(2, 1)(0), 30.0);  // row without valid pixels

  SeedField full(4, 4);
  full.valid.fill(1);
  SceneMap<PlanarDisparity> s2(4, 4);
  for (auto& v : s2.z) v(0) = 3;
  occlusion_correct(s2, full, false);
  for (const auto& v : s2.z) EXPECT_EQ(v(0), 3.0);
}

TEST(Stereo, InlierMonotonicityInTau) {
  const synthetic::TwoPlaneScene scene{64, 64, 32};
  const auto seed = synthetic::noisy_seed(scene.truth(), {0.5, 0.1, 0.05}, 3);
  const Image left = synthetic::texture(64, 64, 5);
  const auto pyr = build_pyramid(64, 64, 3, 4);
  const auto m = make_planar_disparity(64.0);
  const auto z0 = initialize_scene(seed);
  auto make = [&](double tau0) {
    auto st = make_region_states(pyr, m, false);
    auto data = build_data_quadratics(seed, m, pyr, false);
    auto tau = build_outlier_costs(left, pyr, tau0, false);
    for (int k = 0; k < 3; ++k) {
      st.scales[k].data = std::move(data[k]);
      st.scales[k].tau = std::move(tau[k]);
    }
    upsweep(pyr, m, z0, st, false);
    update_regions(st, 0.1, false);
    return st;
  };
  const auto lo = make(0.5);
  const auto hi = make(2.0);
  std::size_t lo_out = 0, hi_out = 0;
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < lo.scales[k].size(); ++i) {
      lo_out += lo.scales[k].inlier[i] ? 0 : 1;
      hi_out += hi.scales[k].inlier[i] ? 0 : 1;
      if (lo.scales[k].inlier[i]) {
        EXPECT_TRUE(hi.scales[k].inlier[i]);
      }
    }
  EXPECT_GT(lo_out, hi_out);
}

TEST(Stereo, FrontoParallelSceneIsAllInliers) {
  SeedField seed(64, 64);
  seed.z.fill(17.0f);
  seed.valid.fill(1);
  seed = classify_weights(seed);
  StereoParams p;
  p.num_scales = 3;
  p.occlusion_iteration = 6;
  p.post_occlusion_iterations = 6;
  const auto res = run_stereo_from_seed(synthetic::texture(64, 64, 1), seed, p);
  for (const auto& s : res.states.scales)
    for (auto i : s.inlier) EXPECT_EQ(i, 1);
  for (float d : res.disparity) EXPECT_NEAR(d, 17.0f, 1e-3);
  EXPECT_EQ(res.trace.size(), 12u);
}

TEST(Stereo, SnapshotPrecedesOcclusionHook) {
  synthetic::OccluderScene sc;
  sc.width = 96;
  sc.height = 64;
  sc.bar_x0 = 50;
  sc.bar_x1 = 80;
  sc.background = 4;
  sc.foreground = 16;
  const auto [l, r] = sc.render(3);
  StereoParams p;
  p.num_scales = 3;
  p.occlusion_iteration = 8;
  p.post_occlusion_iterations = 2;
  p.sgm.max_disparity = 24;
  p.snapshot_iterations = {8};
  const auto res = run_stereo(l, r, p);
  ASSERT_TRUE(res.diagnostics.before_occlusion.has_value());
  ASSERT_EQ(res.diagnostics.snapshots.count(8), 1u);
  EXPECT_EQ(res.diagnostics.snapshots.at(8).values(), res.diagnostics.before_occlusion->values());
  const auto& before = *res.diagnostics.before_occlusion;
  const auto& after = *res.diagnostics.after_occlusion;
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_LE(after[i], before[i]);
}

TEST(StereoParams, Validation) {
  StereoParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.total_iterations(), 80);
  const auto c = p.solver_config();
  EXPECT_DOUBLE_EQ(c.lambda0, 0.4 / 262144.0);
  p.tau0 = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}
