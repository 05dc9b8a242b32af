#ifndef CONSENSUS_SYNTHETIC_HPP
#define CONSENSUS_SYNTHETIC_HPP

// Constructed scenes with known disparity, used by tests, the bench verb
// and the samples.

#include "consensus/grid.hpp"
#include "consensus/sgm_seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>

namespace consensus::synthetic {

/// Smooth random texture in [0, 255]: white noise on a coarse lattice,
/// bilinearly upsampled, plus a little fine noise.
inline Image texture(int width, int height, std::uint32_t seed,
                     int cell = 3, double fine = 12.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> coarse(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const int gw = width / cell + 2;
  const int gh = height / cell + 2;
  Grid<double> lattice(gw, gh);
  for (double& v : lattice) v = coarse(rng);
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const double fy = static_cast<double>(y) / cell;
      const int ix = static_cast<int>(fx);
      const int iy = static_cast<int>(fy);
      const double ax = fx - ix;
      const double ay = fy - iy;
      const double v = (1 - ax) * (1 - ay) * lattice(ix, iy) +
                       ax * (1 - ay) * lattice(ix + 1, iy) +
                       (1 - ax) * ay * lattice(ix, iy + 1) +
                       ax * ay * lattice(ix + 1, iy + 1);
      img(x, y) = static_cast<float>(
          std::clamp(30.0 + 195.0 * v + fine * jitter(rng), 0.0, 255.0));
    }
  return img;
}

/// Disparity plane d = a·x + b·y + c in pixel coordinates.
struct Plane {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double operator()(double x, double y) const { return a * x + b * y + c; }
};

/// Left half follows `left`, columns x >= crease follow `right`. The
/// default planes leave a disparity step of about 17.6 px at the crease.
struct TwoPlaneScene {
  int width = 256;
  int height = 256;
  int crease = 128;
  Plane left{0.02, 0.01, 20.0};
  Plane right{-0.03, 0.015, 44.0};  // ~17.6 px step at the crease

  double disparity(int x, int y) const {
    return x < crease ? left(x, y) : right(x, y);
  }
  Grid<float> truth() const {
    Grid<float> d(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) d(x, y) = static_cast<float>(disparity(x, y));
    return d;
  }
};

struct SeedNoise {
  double sigma = 0.25;     // Gaussian noise on kept seeds (px)
  double dropout = 0.10;   // fraction of pixels marked invalid
  double gross = 0.0;      // fraction of kept seeds replaced by uniform junk
  double gross_max = 60.0;
  double jump_threshold = 1.0;
};

/// Seed sampled from a ground-truth disparity map.
inline SeedField noisy_seed(const Grid<float>& truth, const SeedNoise& noise,
                            std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise.sigma);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  SeedField s(truth.width(), truth.height());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double drop = uni(rng);
    const double junk = uni(rng);
    const double junk_value = uni(rng) * noise.gross_max;
    const double n = gauss(rng);
    if (drop < noise.dropout) continue;
    s.valid[i] = 1;
    s.z[i] = static_cast<float>(junk < noise.gross ? junk_value
                                                   : std::max(0.0, truth[i] + n));
  }
  return classify_weights(std::move(s), noise.jump_threshold);
}

/// Background plane at constant disparity with a fronto-parallel bar in
/// front of it. Background pixels just left of the bar are hidden in the
/// right view.
struct OccluderScene {
  int width = 192;
  int height = 128;
  int bar_x0 = 80;  // bar occupies [bar_x0, bar_x1) in the left view
  int bar_x1 = 120;
  int background = 8;
  int foreground = 24;

  int occluded_begin() const { return bar_x0 - (foreground - background); }
  int occluded_end() const { return bar_x0; }

  bool in_bar(int x) const { return x >= bar_x0 && x < bar_x1; }
  bool occluded(int x) const { return x >= occluded_begin() && x < occluded_end(); }

  Grid<float> truth() const {
    Grid<float> d(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        d(x, y) = static_cast<float>(in_bar(x) ? foreground : background);
    return d;
  }

  /// Rectified pair: the right view sees surface point x at x - d.
  std::pair<Image, Image> render(std::uint32_t seed) const {
    const int margin = foreground + 4;
    const Image bg = texture(width + margin, height, seed);
    const Image fg = texture(width + margin, height, seed + 7919u);
    Image left(width, height), right(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        left(x, y) = in_bar(x) ? fg(x, y) : bg(x, y);
        const int xf = x + foreground;
        right(x, y) = in_bar(xf) ? fg(xf, y) : bg(x + background, y);
      }
    return {left, right};
  }
};

/// Rectified pair for a piecewise-smooth disparity map. The left view is a
/// texture; the right view at column xr shows the left surface point x with
/// x - d(x) = xr, nearest surface (largest disparity) winning. Disparities
/// are linearly interpolated between columns unless they jump by >= 1 px.
inline std::pair<Image, Image> render_pair(const Grid<float>& disparity,
                                           std::uint32_t seed) {
  const int w = disparity.width();
  const int h = disparity.height();
  float dmax = 0.0f;
  for (float d : disparity) dmax = std::max(dmax, d);
  const int margin = static_cast<int>(std::ceil(dmax)) + 2;
  const int tw = w + margin;
  const Image tex = texture(tw, h, seed);
  const auto sample = [&](double x, int y) {
    x = std::clamp(x, 0.0, static_cast<double>(tw - 1));
    const int x0 = static_cast<int>(x);
    const int x1 = std::min(tw - 1, x0 + 1);
    const double t = x - x0;
    return static_cast<float>((1 - t) * tex(x0, y) + t * tex(x1, y));
  };
  Image left(w, h), right(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) left(x, y) = tex(x, y);
    const auto d = [&](int x) { return static_cast<double>(disparity(std::min(x, w - 1), y)); };
    for (int xr = 0; xr < w; ++xr) {
      double best_d = -1.0, best_x = xr;
      for (int x = xr; x < std::min(tw - 1, xr + margin); ++x) {
        const double d0 = d(x), d1 = d(x + 1);
        if (std::abs(d1 - d0) >= 1.0) continue;
        const double f0 = x - d0, f1 = x + 1 - d1;
        if (xr < std::min(f0, f1) || xr > std::max(f0, f1) || f1 == f0) continue;
        const double t = (xr - f0) / (f1 - f0);
        const double dd = d0 + t * (d1 - d0);
        if (dd > best_d) {
          best_d = dd;
          best_x = x + t;
        }
      }
      right(xr, y) = sample(best_x, y);
    }
  }
  return {left, right};
}

}  // namespace consensus::synthetic

#endif  // CONSENSUS_SYNTHETIC_HPP
