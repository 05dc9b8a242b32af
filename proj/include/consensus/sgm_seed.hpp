#ifndef CONSENSUS_SGM_SEED_HPP
#define CONSENSUS_SGM_SEED_HPP

#include "consensus/grid.hpp"
#include "consensus/parallel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace consensus {

/// Semi-dense disparity seed in the left-image frame.
struct SeedField {
  Grid<float> z;                // disparity in pixels, meaningful where valid
  Grid<std::uint8_t> valid;     // Ω
  Grid<float> weight;           // 0, 1/4 or 1

  SeedField() = default;
  SeedField(int width, int height)
      : z(width, height, 0.0f), valid(width, height, 0),
        weight(width, height, 0.0f) {}

  int width() const { return z.width(); }
  int height() const { return z.height(); }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : valid) n += v ? 1 : 0;
    return n;
  }
};

/// Weight 0 off Ω, 1/4 where some valid 8-neighbour's disparity differs by
/// more than `jump_threshold`, 1 elsewhere on Ω.
inline SeedField classify_weights(SeedField seed, double jump_threshold = 1.0) {
  const int w = seed.width();
  const int h = seed.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!seed.valid(x, y)) {
        seed.weight(x, y) = 0.0f;
        continue;
      }
      bool jump = false;
      for (int dy = -1; dy <= 1 && !jump; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (!seed.valid.contains(nx, ny) || !seed.valid(nx, ny)) continue;
          if (std::abs(double(seed.z(nx, ny)) - double(seed.z(x, y))) >
              jump_threshold) {
            jump = true;
            break;
          }
        }
      seed.weight(x, y) = jump ? 0.25f : 1.0f;
    }
  return seed;
}

struct SgmParams {
  int max_disparity = 256;
  double alpha = 0.7;          // census share of the matching cost
  double p1 = 7.0;
  double p2 = 100.0;           // divided by the intensity step along the path
  double gradient_cap = 8.0;
  int census_radius = 2;       // 5x5 window
  int lr_tolerance = 1;
  double jump_threshold = 1.0;
  bool parallel = true;
};

namespace sgm_detail {

// Integer cost units: matching costs and penalties are multiplied by this
// before rounding so the volumes fit in 16 bits.
inline constexpr double kCostScale = 8.0;

inline float clamped(const Image& img, int x, int y) {
  x = std::clamp(x, 0, img.width() - 1);
  y = std::clamp(y, 0, img.height() - 1);
  return img(x, y);
}

}  // namespace sgm_detail

/// Census descriptor: one bit per window offset, set when the neighbour is
/// darker than the centre. Borders are clamped.
inline Grid<std::uint64_t> census_transform(const Image& img, int radius) {
  if (radius < 1 || (2 * radius + 1) * (2 * radius + 1) - 1 > 64) {
    throw std::invalid_argument("census_transform: unsupported radius");
  }
  Grid<std::uint64_t> out(img.width(), img.height(), 0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const float c = img(x, y);
      std::uint64_t bits = 0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx == 0 && dy == 0) continue;
          bits = (bits << 1) |
                 (sgm_detail::clamped(img, x + dx, y + dy) < c ? 1u : 0u);
        }
      out(x, y) = bits;
    }
  return out;
}

/// Central-difference horizontal gradient with clamped borders.
inline Image gradient_x(const Image& img) {
  Image g(img.width(), img.height(), 0.0f);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      g(x, y) = 0.5f * (sgm_detail::clamped(img, x + 1, y) -
                        sgm_detail::clamped(img, x - 1, y));
  return g;
}

/// Raw winner-take-all disparities from the aggregated volume, before the
/// left-right check. Exposed for tests.
struct SgmDisparities {
  Grid<std::int32_t> left;
  Grid<std::int32_t> right;
};

inline SgmDisparities sgm_disparities(const Image& left, const Image& right,
                                      const SgmParams& params) {
  using sgm_detail::kCostScale;
  if (!left.same_shape(right)) {
    throw std::invalid_argument("compute_seed: image dimensions differ");
  }
  const int w = left.width();
  const int h = left.height();
  if (w == 0 || h == 0) throw std::invalid_argument("compute_seed: empty image");
  if (params.max_disparity < 0 || params.max_disparity >= w) {
    throw std::invalid_argument("compute_seed: max_disparity must be < width");
  }
  const int nd = params.max_disparity + 1;
  const auto idx = [&](int x, int y) {
    return (static_cast<std::size_t>(y) * w + x) * nd;
  };

  const auto cl = census_transform(left, params.census_radius);
  const auto cr = census_transform(right, params.census_radius);
  const Image gl = gradient_x(left);
  const Image gr = gradient_x(right);
  const int bits = (2 * params.census_radius + 1) * (2 * params.census_radius + 1) - 1;
  const auto quantize = [](double v) {
    return static_cast<std::uint16_t>(std::lround(v * kCostScale));
  };
  const std::uint16_t invalid_cost = quantize(
      params.alpha * bits + (1.0 - params.alpha) * params.gradient_cap);

  std::vector<std::uint16_t> cost(static_cast<std::size_t>(w) * h * nd);
  parallel_for(h, params.parallel, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < w; ++x) {
      std::uint16_t* c = &cost[idx(x, y)];
      for (int d = 0; d < nd; ++d) {
        if (d > x) {
          c[d] = invalid_cost;
          continue;
        }
        const int ham = std::popcount(cl(x, y) ^ cr(x - d, y));
        const double grad = std::min<double>(
            std::abs(gl(x, y) - gr(x - d, y)), params.gradient_cap);
        c[d] = quantize(params.alpha * ham + (1.0 - params.alpha) * grad);
      }
    }
  });

  const int p1 = static_cast<int>(std::lround(params.p1 * kCostScale));
  const int p2 = static_cast<int>(std::lround(params.p2 * kCostScale));
  std::vector<std::uint16_t> sum(cost.size(), 0);
  static constexpr std::array<std::array<int, 2>, 8> kDirs = {{
      {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}};
  std::vector<std::uint16_t> prev_row(static_cast<std::size_t>(w) * nd);
  std::vector<std::uint16_t> cur_row(static_cast<std::size_t>(w) * nd);

  for (const auto& dir : kDirs) {
    const int dx = dir[0];
    const int dy = dir[1];
    for (int step = 0; step < h; ++step) {
      const int y = dy >= 0 ? step : h - 1 - step;
      for (int s = 0; s < w; ++s) {
        const int x = dx >= 0 ? s : w - 1 - s;
        const std::uint16_t* c = &cost[idx(x, y)];
        std::uint16_t* out = &cur_row[static_cast<std::size_t>(x) * nd];
        const int qx = x - dx;
        const int qy = y - dy;
        if (qx < 0 || qx >= w || qy < 0 || qy >= h) {
          std::copy(c, c + nd, out);
        } else {
          const std::uint16_t* prev =
              dy == 0 ? &cur_row[static_cast<std::size_t>(qx) * nd]
                      : &prev_row[static_cast<std::size_t>(qx) * nd];
          const int min_prev = *std::min_element(prev, prev + nd);
          const double step_i = std::abs(left(x, y) - left(qx, qy));
          const int p2e =
              std::max(p1, static_cast<int>(p2 / std::max(1.0, step_i)));
          for (int d = 0; d < nd; ++d) {
            int best = prev[d];
            if (d > 0) best = std::min(best, prev[d - 1] + p1);
            if (d + 1 < nd) best = std::min(best, prev[d + 1] + p1);
            best = std::min(best, min_prev + p2e);
            out[d] = static_cast<std::uint16_t>(c[d] + best - min_prev);
          }
        }
        std::uint16_t* acc = &sum[idx(x, y)];
        for (int d = 0; d < nd; ++d) acc[d] = static_cast<std::uint16_t>(acc[d] + out[d]);
      }
      std::swap(prev_row, cur_row);
    }
  }

  SgmDisparities res{Grid<std::int32_t>(w, h, 0), Grid<std::int32_t>(w, h, 0)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint16_t* s = &sum[idx(x, y)];
      const int dmax = std::min(nd - 1, x);
      res.left(x, y) = static_cast<std::int32_t>(
          std::min_element(s, s + dmax + 1) - s);
      int best_d = 0;
      int best = std::numeric_limits<int>::max();
      for (int d = 0; d < nd && x + d < w; ++d) {
        const int v = sum[idx(x + d, y) + d];
        if (v < best) {
          best = v;
          best_d = d;
        }
      }
      res.right(x, y) = best_d;
    }
  return res;
}

/// Census + gradient matching cost, 8-path semi-global aggregation,
/// winner-take-all and a left-right consistency check. Weights are
/// classified with `params.jump_threshold`.
inline SeedField compute_seed(const Image& left, const Image& right,
                              const SgmParams& params = {}) {
  const SgmDisparities d = sgm_disparities(left, right, params);
  const int w = left.width();
  const int h = left.height();
  SeedField seed(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int dl = d.left(x, y);
      const int xr = x - dl;
      if (xr < 0) continue;
      if (std::abs(dl - d.right(xr, y)) > params.lr_tolerance) continue;
      seed.z(x, y) = static_cast<float>(dl);
      seed.valid(x, y) = 1;
    }
  return classify_weights(std::move(seed), params.jump_threshold);
}

}  // namespace consensus

#endif  // CONSENSUS_SGM_SEED_HPP
