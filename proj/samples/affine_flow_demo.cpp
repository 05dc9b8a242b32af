// The solver with a non-stereo local model: two affine flow fields meeting
// at a vertical boundary, observed on a sparse, noisy subset of pixels with
// a few gross outliers. Prints the endpoint error of the measurements and
// of the consensus.

#include "consensus/aggregate.hpp"
#include "consensus/local_model.hpp"
#include "consensus/region_pyramid.hpp"
#include "consensus/solver.hpp"

#include <cmath>
#include <iostream>
#include <random>

using namespace consensus;

int main() {
  const int w = 128, h = 96, boundary = 70;
  const auto model = make_affine_flow(128.0);
  const auto flow = [&](int x, int y) {
    Eigen::Vector2d f;
    if (x < boundary)
      f << 1.5 + 0.01 * x - 0.005 * y, -0.5 + 0.004 * y;
    else
      f << -2.0 + 0.008 * y, 1.0 + 0.006 * x;
    return f;
  };

  std::mt19937 rng(3);
  std::normal_distribution<double> noise(0.0, 0.15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid<DataQuadratic<6>> per_pixel(w, h);
  Grid<Eigen::Vector2d> z0(w, h, Eigen::Vector2d::Zero());
  double meas_err = 0.0;
  int meas = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (u(rng) < 0.5) continue;
      Eigen::Vector2d m = flow(x, y) + Eigen::Vector2d(noise(rng), noise(rng));
      if (u(rng) < 0.05) m = Eigen::Vector2d(8 * u(rng) - 4, 8 * u(rng) - 4);
      const auto U = model.evaluate(x, y);
      DataQuadratic<6> q;
      q.a.add_gram(U);
      q.b = U.transpose() * m;
      q.c = m.squaredNorm();
      per_pixel(x, y) = q;
      z0(x, y) = m;
      meas_err += (m - flow(x, y)).norm();
      ++meas;
    }

  const auto pyr = build_pyramid(w, h, 4, 4);
  auto states = make_region_states(pyr, model);
  auto data = accumulate_up(pyr, per_pixel, DataQuadratic<6>{});
  for (int k = 0; k < pyr.num_scales(); ++k) {
    states.scales[k].data = std::move(data[k]);
    const double area = pyr.side(k) * pyr.side(k);
    std::fill(states.scales[k].tau.begin(), states.scales[k].tau.end(), 0.5 * area);
  }

  SolverConfig cfg;
  cfg.lambda_final = 1.0;
  cfg.lambda0 = cfg.lambda_final / 262144.0;
  cfg.max_iters = 60;
  const auto res = run(cfg, pyr, model, std::move(states), z0);

  double err = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) err += (res.scene.z(x, y) - flow(x, y)).norm();
  std::cout << "measurements: " << meas << " pixels, mean endpoint error "
            << meas_err / meas << " px\n";
  std::cout << "consensus:    " << w * h << " pixels, mean endpoint error "
            << err / (w * h) << " px\n";
  std::cout << "final L = " << res.trace.back().cost << '\n';
  return 0;
}
