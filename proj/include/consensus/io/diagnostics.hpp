#ifndef CONSENSUS_IO_DIAGNOSTICS_HPP
#define CONSENSUS_IO_DIAGNOSTICS_HPP

#include "consensus/io/image_io.hpp"
#include "consensus/region_pyramid.hpp"
#include "consensus/solver.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace consensus::io {

/// Inlier status of a non-overlapping subset of scale-k regions: tiles at
/// anchors that are multiples of the side, the last row/column clamped to
/// the image border so the tiles cover every pixel. 255 = inlier.
template <LocalModel Model>
Grid<std::uint8_t> inlier_mask(const RegionPyramid& pyramid,
                               const RegionStates<Model>& states, int k) {
  const ScaleGeometry& g = pyramid.scale(k);
  const int s = g.side;
  Grid<std::uint8_t> mask(pyramid.width(), pyramid.height(), 0);
  const auto anchors = [s](int extent) {
    std::vector<int> a;
    for (int v = 0; v + s <= extent; v += s) a.push_back(v);
    if (a.back() + s < extent) a.push_back(extent - s);
    return a;
  };
  for (int ay : anchors(pyramid.height()))
    for (int ax : anchors(pyramid.width())) {
      const std::uint8_t v = states.scales[k].inlier[g.index(ax, ay)] ? 255 : 0;
      for (int y = ay; y < ay + s; ++y)
        for (int x = ax; x < ax + s; ++x) mask(x, y) = v;
    }
  return mask;
}

/// Union of the inlying regions covering n (J_n as a pixel set).
template <LocalModel Model>
Grid<std::uint8_t> support_region(const RegionPyramid& pyramid,
                                  const RegionStates<Model>& states, Pixel n) {
  const int w = pyramid.width();
  const int h = pyramid.height();
  Grid<std::int32_t> diff(w + 1, h + 1, 0);
  for (const RegionId& r : pyramid.covering_regions(n)) {
    if (!states.scales[r.scale].inlier[pyramid.scale(r.scale).index(r.x, r.y)])
      continue;
    const int s = pyramid.side(r.scale);
    diff(r.x, r.y) += 1;
    diff(r.x + s, r.y) -= 1;
    diff(r.x, r.y + s) -= 1;
    diff(r.x + s, r.y + s) += 1;
  }
  for (int y = 0; y <= h; ++y)
    for (int x = 1; x <= w; ++x) diff(x, y) += diff(x - 1, y);
  for (int y = 1; y <= h; ++y)
    for (int x = 0; x <= w; ++x) diff(x, y) += diff(x, y - 1);
  Grid<std::uint8_t> mask(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) mask(x, y) = diff(x, y) > 0 ? 1 : 0;
  return mask;
}

/// Gray image with the support boundary drawn at 255 and the query pixel
/// at 0; pixels inside the support are brightened.
inline Grid<std::uint8_t> support_overlay(const Image& gray,
                                          const Grid<std::uint8_t>& support,
                                          Pixel n) {
  const int w = support.width();
  const int h = support.height();
  float lo = 0.0f, hi = 1.0f;
  if (!gray.empty()) {
    const auto [a, b] = std::minmax_element(gray.begin(), gray.end());
    lo = *a;
    hi = std::max(*b, lo + 1e-6f);
  }
  Grid<std::uint8_t> out(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float g = gray.empty() ? 0.5f : (gray(x, y) - lo) / (hi - lo);
      const bool in = support(x, y) != 0;
      out(x, y) = static_cast<std::uint8_t>(in ? 96 + 120 * g : 80 * g);
      if (!in) continue;
      bool edge = false;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int qx = x + dx, qy = y + dy;
          if (!support.contains(qx, qy) || !support(qx, qy)) edge = true;
        }
      if (edge) out(x, y) = 255;
    }
  out(n.x, n.y) = 0;
  return out;
}

struct DiagnosticsRequest {
  bool inlier_masks = true;
  bool cost_trace = true;
  std::vector<Pixel> support_pixels;
  std::map<int, Grid<float>> snapshots;
};

/// Best-effort artifact dump; failures are reported on stderr and skipped.
/// Returns the number of files written.
template <LocalModel Model>
int emit_diagnostics(const RegionPyramid& pyramid,
                     const RegionStates<Model>& states,
                     const Grid<std::int32_t>& confidence,
                     const std::vector<TraceRow>& trace, const Image& gray,
                     const std::string& outdir,
                     const DiagnosticsRequest& request) {
  namespace fs = std::filesystem;
  int written = 0;
  const auto attempt = [&](const std::string& what, auto&& fn) {
    try {
      fn();
      ++written;
    } catch (const std::exception& e) {
      std::cerr << "warning: could not write " << what << ": " << e.what() << '\n';
    }
  };
  std::error_code ec;
  fs::create_directories(outdir, ec);
  const fs::path dir(outdir);

  if (request.inlier_masks) {
    for (int k = 0; k < pyramid.num_scales(); ++k) {
      const std::string p = (dir / ("inliers_scale" + std::to_string(k + 1) + ".png")).string();
      attempt(p, [&] { write_png8(p, inlier_mask(pyramid, states, k)); });
    }
  }
  {
    const std::string p = (dir / "consensus_degree.png").string();
    attempt(p, [&] { write_confidence(confidence, p); });
  }
  for (const Pixel& n : request.support_pixels) {
    const std::string p = (dir / ("support_x" + std::to_string(n.x) + "_y" +
                                  std::to_string(n.y) + ".png")).string();
    attempt(p, [&] {
      if (n.x < 0 || n.y < 0 || n.x >= pyramid.width() || n.y >= pyramid.height())
        throw std::out_of_range("pixel outside image");
      write_png8(p, support_overlay(gray, support_region(pyramid, states, n), n));
    });
  }
  if (request.cost_trace) {
    const std::string p = (dir / "cost_trace.csv").string();
    attempt(p, [&] {
      std::ofstream os(p);
      if (!os) throw std::runtime_error("cannot open file");
      write_trace_csv(os, trace);
    });
  }
  for (const auto& [it, snap] : request.snapshots) {
    const std::string p = (dir / ("snapshot_iter" + std::to_string(it) + ".png")).string();
    attempt(p, [&] { write_disparity(snap, p); });
  }
  return written;
}

}  // namespace consensus::io

#endif  // CONSENSUS_IO_DIAGNOSTICS_HPP
