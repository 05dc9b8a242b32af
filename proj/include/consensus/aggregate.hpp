#ifndef CONSENSUS_AGGREGATE_HPP
#define CONSENSUS_AGGREGATE_HPP

#include "consensus/grid.hpp"
#include "consensus/parallel.hpp"
#include "consensus/region_pyramid.hpp"

#include <vector>

namespace consensus {

/// out(x, y) = Σ_{0 <= i, j < side} in(x + i, y + j), for every anchor that
/// keeps the window inside `in`. Summation runs along x first, then y.
template <typename T>
Grid<T> box_sum(const Grid<T>& in, int side, const T& zero,
                bool parallel = true) {
  const int gw = in.width() - side + 1;
  const int gh = in.height() - side + 1;
  if (gw <= 0 || gh <= 0) return Grid<T>(0, 0, zero);
  Grid<T> rows(gw, in.height(), zero);
  parallel_for(in.height(), parallel, [&](std::ptrdiff_t y) {
    const T* src = in.row(static_cast<int>(y));
    T* dst = rows.row(static_cast<int>(y));
    for (int x = 0; x < gw; ++x) {
      T acc = src[x];
      for (int i = 1; i < side; ++i) acc += src[x + i];
      dst[x] = acc;
    }
  });
  Grid<T> out(gw, gh, zero);
  parallel_for(gh, parallel, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    T* dst = out.row(y);
    for (int x = 0; x < gw; ++x) dst[x] = rows(x, y);
    for (int j = 1; j < side; ++j) {
      const T* src = rows.row(y + j);
      for (int x = 0; x < gw; ++x) dst[x] += src[x];
    }
  });
  return out;
}

/// Adjoint of box_sum: out(x, y) = Σ over anchors (ax, ay) of `anchors`
/// whose side x side window contains (x, y). Output is width x height.
template <typename T>
Grid<T> covering_sum(const Grid<T>& anchors, int side, int width, int height,
                     const T& zero, bool parallel = true) {
  const int gw = anchors.width();
  const int gh = anchors.height();
  Grid<T> cols(width, gh, zero);
  parallel_for(gh, parallel, [&](std::ptrdiff_t ay) {
    const T* src = anchors.row(static_cast<int>(ay));
    T* dst = cols.row(static_cast<int>(ay));
    for (int x = 0; x < width; ++x) {
      const int lo = std::max(0, x - side + 1);
      const int hi = std::min(gw - 1, x);
      T acc = zero;
      for (int ax = lo; ax <= hi; ++ax) acc += src[ax];
      dst[x] = acc;
    }
  });
  Grid<T> out(width, height, zero);
  parallel_for(height, parallel, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    const int lo = std::max(0, y - side + 1);
    const int hi = std::min(gh - 1, y);
    T* dst = out.row(y);
    for (int ay = lo; ay <= hi; ++ay) {
      const T* src = cols.row(ay);
      for (int x = 0; x < width; ++x) dst[x] += src[x];
    }
  });
  return out;
}

/// Per-region sums of a per-pixel quantity over every scale of the pyramid:
/// explicit window sums at the finest scale, quadrant-child sums above.
template <typename T>
std::vector<std::vector<T>> accumulate_up(const RegionPyramid& pyramid,
                                          const Grid<T>& pixel_terms,
                                          const T& zero, bool parallel = true) {
  std::vector<std::vector<T>> out(pyramid.num_scales());
  out[0] = box_sum(pixel_terms, pyramid.side(0), zero, parallel).values();
  for (int k = 1; k < pyramid.num_scales(); ++k) {
    const ScaleGeometry& g = pyramid.scale(k);
    const ScaleGeometry& c = pyramid.scale(k - 1);
    const int h = c.side;
    const std::vector<T>& child = out[k - 1];
    std::vector<T>& cur = out[k];
    cur.assign(g.count(), zero);
    parallel_for(g.grid_height, parallel, [&](std::ptrdiff_t yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < g.grid_width; ++x) {
        T acc = child[c.index(x, y)];
        acc += child[c.index(x + h, y)];
        acc += child[c.index(x, y + h)];
        acc += child[c.index(x + h, y + h)];
        cur[g.index(x, y)] = acc;
      }
    });
  }
  return out;
}

}  // namespace consensus

#endif  // CONSENSUS_AGGREGATE_HPP
