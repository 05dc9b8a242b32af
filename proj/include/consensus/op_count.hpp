#ifndef CONSENSUS_OP_COUNT_HPP
#define CONSENSUS_OP_COUNT_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace consensus::oracle {

// Instrumented aggregation on the one-dimensional dyadic pyramid: N pixels,
// scale k = 1..K holds every overlapping segment of length 2^k, and a segment
// at k > 1 is the union of the two segments of length 2^(k-1) it starts and
// ends with. The local model is the constant U(n) = 1, so every addition is a
// scalar addition and can be counted exactly.

enum class AggregationMode { naive, hierarchical };

struct DyadicInstance {
  int num_pixels = 0;
  int num_scales = 0;
  std::vector<double> z;                       // scene values, size N
  std::vector<std::vector<double>> theta;      // per scale, per offset
  std::vector<std::vector<std::uint8_t>> inlier;

  int length(int k) const { return 2 << k; }  // 0-based scale k
  int count(int k) const { return num_pixels - length(k) + 1; }
};

struct DyadicResult {
  std::uint64_t additions = 0;
  std::vector<std::vector<double>> phi;
  std::vector<std::vector<double>> e;
  std::vector<double> consensus_num;
  std::vector<double> consensus_den;
};

namespace detail {
struct Counter {
  std::uint64_t n = 0;
  double add(double a, double b) {
    ++n;
    return a + b;
  }
};
}  // namespace detail

/// One full iteration's worth of consistency-term and consensus aggregation.
inline DyadicResult count_operations(AggregationMode mode,
                                     const DyadicInstance& inst) {
  const int n = inst.num_pixels;
  const int scales = inst.num_scales;
  if (scales < 1 || inst.length(scales - 1) > n ||
      static_cast<int>(inst.z.size()) != n ||
      static_cast<int>(inst.theta.size()) != scales ||
      static_cast<int>(inst.inlier.size()) != scales) {
    throw std::invalid_argument("count_operations: malformed instance");
  }
  for (int k = 0; k < scales; ++k) {
    if (static_cast<int>(inst.theta[k].size()) != inst.count(k) ||
        static_cast<int>(inst.inlier[k].size()) != inst.count(k)) {
      throw std::invalid_argument("count_operations: malformed instance");
    }
  }
  detail::Counter ctr;
  DyadicResult r;
  r.phi.resize(scales);
  r.e.resize(scales);

  // Consistency terms.
  for (int k = 0; k < scales; ++k) {
    const int len = inst.length(k);
    r.phi[k].resize(inst.count(k));
    r.e[k].resize(inst.count(k));
    for (int x = 0; x < inst.count(k); ++x) {
      if (mode == AggregationMode::naive || k == 0) {
        double phi = inst.z[x];
        double e = inst.z[x] * inst.z[x];
        for (int i = 1; i < len; ++i) {
          phi = ctr.add(phi, inst.z[x + i]);
          e = ctr.add(e, inst.z[x + i] * inst.z[x + i]);
        }
        r.phi[k][x] = phi;
        r.e[k][x] = e;
      } else {
        const int h = inst.length(k - 1);
        r.phi[k][x] = ctr.add(r.phi[k - 1][x], r.phi[k - 1][x + h]);
        r.e[k][x] = ctr.add(r.e[k - 1][x], r.e[k - 1][x + h]);
      }
    }
  }

  // Consensus numerator and denominator.
  r.consensus_num.assign(n, 0.0);
  r.consensus_den.assign(n, 0.0);
  if (mode == AggregationMode::naive) {
    for (int p = 0; p < n; ++p) {
      bool first = true;
      for (int k = 0; k < scales; ++k) {
        const int len = inst.length(k);
        for (int x = std::max(0, p - len + 1); x <= std::min(inst.count(k) - 1, p);
             ++x) {
          const double t = inst.inlier[k][x] ? inst.theta[k][x] : 0.0;
          const double c = inst.inlier[k][x];
          if (first) {
            r.consensus_num[p] = t;
            r.consensus_den[p] = c;
            first = false;
          } else {
            r.consensus_num[p] = ctr.add(r.consensus_num[p], t);
            r.consensus_den[p] = ctr.add(r.consensus_den[p], c);
          }
        }
      }
    }
    r.additions = ctr.n;
    return r;
  }

  std::vector<std::vector<double>> tp(scales), ip(scales);
  for (int k = scales - 1; k >= 0; --k) {
    tp[k].resize(inst.count(k));
    ip[k].resize(inst.count(k));
    for (int x = 0; x < inst.count(k); ++x) {
      double t = inst.inlier[k][x] ? inst.theta[k][x] : 0.0;
      double c = inst.inlier[k][x];
      if (k + 1 < scales) {
        const int h = inst.length(k);
        for (int px : {x, x - h}) {
          if (px < 0 || px >= inst.count(k + 1)) continue;
          t = ctr.add(t, tp[k + 1][px]);
          c = ctr.add(c, ip[k + 1][px]);
        }
      }
      tp[k][x] = t;
      ip[k][x] = c;
    }
  }
  const int len0 = inst.length(0);
  for (int p = 0; p < n; ++p) {
    bool first = true;
    for (int x = std::max(0, p - len0 + 1); x <= std::min(inst.count(0) - 1, p);
         ++x) {
      if (first) {
        r.consensus_num[p] = tp[0][x];
        r.consensus_den[p] = ip[0][x];
        first = false;
      } else {
        r.consensus_num[p] = ctr.add(r.consensus_num[p], tp[0][x]);
        r.consensus_den[p] = ctr.add(r.consensus_den[p], ip[0][x]);
      }
    }
  }
  r.additions = ctr.n;
  return r;
}

}  // namespace consensus::oracle

#endif  // CONSENSUS_OP_COUNT_HPP
