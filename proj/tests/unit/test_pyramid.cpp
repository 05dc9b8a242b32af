#include "consensus/region_pyramid.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace consensus;

TEST(Pyramid, RegionCounts) {
  const auto p = build_pyramid(64, 64, 5, 4);
  EXPECT_EQ(p.scale(0).count(), 3721u);
  EXPECT_EQ(p.scale(4).count(), 1u);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(p.side(k), 4 << k);
}

TEST(Pyramid, TooSmallImageIsRejected) {
  EXPECT_THROW(build_pyramid(63, 64, 5, 4), std::invalid_argument);
  EXPECT_THROW(build_pyramid(64, 64, 0, 4), std::invalid_argument);
  EXPECT_THROW(build_pyramid(64, 64, 2, 1), std::invalid_argument);
}

TEST(Pyramid, InteriorCoverage) {
  const auto p = build_pyramid(128, 128, 5, 4);
  EXPECT_EQ(p.coverage({64, 64}), 5456u);
  EXPECT_EQ(p.covering_regions({64, 64}).size(), 5456u);
  // (32,32) is only 32 px from the border: 33 anchors per axis at side 64.
  EXPECT_EQ(p.coverage({32, 32}), 16u + 64u + 256u + 1024u + 33u * 33u);
  EXPECT_EQ(p.covering_regions({0, 0}).size(), 5u);
}

TEST(Pyramid, SingleScale) {
  const auto p = build_pyramid(8, 8, 1, 4);
  const auto regions = p.covering_regions({1, 1});
  ASSERT_EQ(regions.size(), 4u);
  std::set<std::pair<int, int>> anchors;
  for (const auto& r : regions) anchors.insert({r.x, r.y});
  EXPECT_EQ(anchors, (std::set<std::pair<int, int>>{{0, 0}, {1, 0}, {0, 1}, {1, 1}}));
  for (const auto& r : regions) {
    EXPECT_TRUE(p.children(r).empty());
    EXPECT_TRUE(p.parents(r).empty());
  }
}

TEST(Pyramid, CoveringRegionsOutOfBounds) {
  const auto p = build_pyramid(16, 16, 2, 4);
  EXPECT_THROW(p.covering_regions({16, 0}), std::out_of_range);
  EXPECT_THROW(p.covering_regions({0, -1}), std::out_of_range);
}

TEST(Pyramid, SweepOrders) {
  const auto p = build_pyramid(16, 16, 2, 4);
  EXPECT_EQ(p.sweep_order_up(), (std::vector<int>{0, 1}));
  EXPECT_EQ(p.sweep_order_down(), (std::vector<int>{1, 0}));
}

TEST(Pyramid, ChildrenPartitionParent) {
  const auto p = build_pyramid(80, 72, 4, 4);
  std::mt19937 rng(11);
  for (int t = 0; t < 100; ++t) {
    const int k = 1 + static_cast<int>(rng() % 3);
    const auto& g = p.scale(k);
    const RegionId r{k, static_cast<int>(rng() % g.grid_width),
                     static_cast<int>(rng() % g.grid_height)};
    std::multiset<std::pair<int, int>> from_children, direct;
    for (const auto& c : p.children(r)) {
      ASSERT_TRUE(p.contains(c));
      for (const auto& n : p.pixels(c)) from_children.insert({n.x, n.y});
    }
    for (const auto& n : p.pixels(r)) direct.insert({n.x, n.y});
    EXPECT_EQ(from_children, direct);
  }
}

TEST(Pyramid, ParentChildDuality) {
  const auto p = build_pyramid(40, 36, 3, 4);
  for (int k = 0; k < p.num_scales(); ++k) {
    const auto& g = p.scale(k);
    for (int y = 0; y < g.grid_height; ++y)
      for (int x = 0; x < g.grid_width; ++x) {
        const RegionId r{k, x, y};
        for (const auto& par : p.parents(r)) {
          const auto kids = p.children(par);
          EXPECT_EQ(std::count(kids.begin(), kids.end(), r), 1);
        }
        for (const auto& c : p.children(r)) {
          const auto pars = p.parents(c);
          EXPECT_EQ(std::count(pars.begin(), pars.end(), r), 1);
        }
      }
  }
}

TEST(Pyramid, ExactlyOneChildThroughEachPixel) {
  const auto p = build_pyramid(64, 64, 4, 4);
  std::mt19937 rng(5);
  for (int t = 0; t < 200; ++t) {
    const int k = 1 + static_cast<int>(rng() % 3);
    const auto& g = p.scale(k);
    const RegionId r{k, static_cast<int>(rng() % g.grid_width),
                     static_cast<int>(rng() % g.grid_height)};
    const Pixel n{r.x + static_cast<int>(rng() % g.side), r.y + static_cast<int>(rng() % g.side)};
    int hits = 0;
    for (const auto& c : p.children(r)) hits += p.region_contains(c, n) ? 1 : 0;
    EXPECT_EQ(hits, 1);
  }
}

TEST(Pyramid, CoverageMatchesEnumeration) {
  const auto p = build_pyramid(40, 40, 3, 4);
  for (int y = 0; y < 40; y += 3)
    for (int x = 0; x < 40; x += 3) {
      std::size_t n = 0;
      for (int k = 0; k < 3; ++k) {
        const auto& g = p.scale(k);
        for (int ay = 0; ay < g.grid_height; ++ay)
          for (int ax = 0; ax < g.grid_width; ++ax)
            n += p.region_contains({k, ax, ay}, {x, y}) ? 1 : 0;
      }
      EXPECT_EQ(p.coverage({x, y}), n);
      EXPECT_EQ(p.covering_regions({x, y}).size(), n);
    }
}
