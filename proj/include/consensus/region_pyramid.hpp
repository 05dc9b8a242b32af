#ifndef CONSENSUS_REGION_PYRAMID_HPP
#define CONSENSUS_REGION_PYRAMID_HPP

#include "consensus/local_model.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace consensus {

/// Region addressed by scale and top-left anchor. Scales are 0-based here:
/// scale 0 holds the finest patches.
struct RegionId {
  int scale = 0;
  int x = 0;
  int y = 0;
  friend bool operator==(const RegionId&, const RegionId&) = default;
};

/// Geometry of one scale: square patches of `side` pixels at every integer
/// anchor that keeps the patch inside the image.
struct ScaleGeometry {
  int side = 0;
  int grid_width = 0;   // number of anchors along x
  int grid_height = 0;  // number of anchors along y

  std::size_t count() const {
    return static_cast<std::size_t>(grid_width) * grid_height;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * grid_width + x;
  }
  bool has_anchor(int x, int y) const {
    return x >= 0 && y >= 0 && x < grid_width && y < grid_height;
  }
};

/// Dense overlapping multi-scale region set. Every region at scale k > 0 is
/// partitioned by its four quadrant children at scale k - 1; regions are
/// addressed arithmetically, no adjacency lists are stored.
class RegionPyramid {
 public:
  RegionPyramid() = default;

  int width() const { return width_; }
  int height() const { return height_; }
  int num_scales() const { return static_cast<int>(scales_.size()); }
  const ScaleGeometry& scale(int k) const { return scales_.at(k); }
  int side(int k) const { return scales_.at(k).side; }

  std::size_t total_regions() const {
    std::size_t n = 0;
    for (const auto& s : scales_) n += s.count();
    return n;
  }

  bool contains(const RegionId& r) const {
    return r.scale >= 0 && r.scale < num_scales() &&
           scales_[r.scale].has_anchor(r.x, r.y);
  }

  bool region_contains(const RegionId& r, Pixel n) const {
    const int s = side(r.scale);
    return n.x >= r.x && n.x < r.x + s && n.y >= r.y && n.y < r.y + s;
  }

  /// Quadrant children in the fixed order (x,y), (x+h,y), (x,y+h), (x+h,y+h).
  /// Empty for scale 0.
  std::vector<RegionId> children(const RegionId& r) const {
    std::vector<RegionId> out;
    if (r.scale == 0) return out;
    const int h = side(r.scale - 1);
    out.reserve(4);
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a)
        out.push_back({r.scale - 1, r.x + a * h, r.y + b * h});
    return out;
  }

  /// Parents at scale k + 1 having `r` as a quadrant child. Empty at the top.
  std::vector<RegionId> parents(const RegionId& r) const {
    std::vector<RegionId> out;
    if (r.scale + 1 >= num_scales()) return out;
    const int h = side(r.scale);
    const ScaleGeometry& up = scales_[r.scale + 1];
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) {
        const int px = r.x - a * h;
        const int py = r.y - b * h;
        if (up.has_anchor(px, py)) out.push_back({r.scale + 1, px, py});
      }
    return out;
  }

  /// Pixels of a region in row-major order.
  std::vector<Pixel> pixels(const RegionId& r) const {
    const int s = side(r.scale);
    std::vector<Pixel> out;
    out.reserve(static_cast<std::size_t>(s) * s);
    for (int y = r.y; y < r.y + s; ++y)
      for (int x = r.x; x < r.x + s; ++x) out.push_back({x, y});
    return out;
  }

  /// Number of regions at scale k containing pixel n.
  std::size_t coverage_at_scale(int k, Pixel n) const {
    const ScaleGeometry& g = scales_.at(k);
    const auto span = [&](int p, int extent) {
      const int lo = std::max(0, p - g.side + 1);
      const int hi = std::min(extent - 1, p);
      return hi >= lo ? hi - lo + 1 : 0;
    };
    return static_cast<std::size_t>(span(n.x, g.grid_width)) *
           span(n.y, g.grid_height);
  }

  std::size_t coverage(Pixel n) const {
    std::size_t c = 0;
    for (int k = 0; k < num_scales(); ++k) c += coverage_at_scale(k, n);
    return c;
  }

  /// Every region (all scales) whose pixel set contains n. Meant for
  /// oracles and diagnostics; the solver never enumerates this.
  std::vector<RegionId> covering_regions(Pixel n) const {
    if (n.x < 0 || n.y < 0 || n.x >= width_ || n.y >= height_) {
      throw std::out_of_range("covering_regions: pixel outside image");
    }
    std::vector<RegionId> out;
    for (int k = 0; k < num_scales(); ++k) {
      const ScaleGeometry& g = scales_[k];
      const int x0 = std::max(0, n.x - g.side + 1);
      const int x1 = std::min(g.grid_width - 1, n.x);
      const int y0 = std::max(0, n.y - g.side + 1);
      const int y1 = std::min(g.grid_height - 1, n.y);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) out.push_back({k, x, y});
    }
    return out;
  }

  /// Scales in dependency order for an upward sweep (children first).
  std::vector<int> sweep_order_up() const {
    std::vector<int> order(scales_.size());
    for (int k = 0; k < num_scales(); ++k) order[k] = k;
    return order;
  }

  /// Scales in dependency order for a downward sweep (parents first).
  std::vector<int> sweep_order_down() const {
    std::vector<int> order(scales_.size());
    for (int k = 0; k < num_scales(); ++k) order[k] = num_scales() - 1 - k;
    return order;
  }

  friend RegionPyramid build_pyramid(int width, int height, int num_scales,
                                     int finest_side);

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<ScaleGeometry> scales_;
};

/// Scales k = 0..num_scales-1 with side finest_side * 2^k.
inline RegionPyramid build_pyramid(int width, int height, int num_scales,
                                   int finest_side) {
  if (num_scales < 1) {
    throw std::invalid_argument("build_pyramid: need at least one scale");
  }
  if (finest_side < 2) {
    throw std::invalid_argument("build_pyramid: finest side must be >= 2");
  }
  if (num_scales > 24) {
    throw std::invalid_argument("build_pyramid: too many scales");
  }
  const long largest = static_cast<long>(finest_side) << (num_scales - 1);
  if (width < largest || height < largest) {
    throw std::invalid_argument(
        "build_pyramid: image " + std::to_string(width) + "x" +
        std::to_string(height) + " is smaller than the largest patch (" +
        std::to_string(largest) + " px); reduce the number of scales");
  }
  RegionPyramid p;
  p.width_ = width;
  p.height_ = height;
  for (int k = 0; k < num_scales; ++k) {
    ScaleGeometry g;
    g.side = finest_side << k;
    g.grid_width = width - g.side + 1;
    g.grid_height = height - g.side + 1;
    p.scales_.push_back(g);
  }
  return p;
}

}  // namespace consensus

#endif  // CONSENSUS_REGION_PYRAMID_HPP
