#ifndef CONSENSUS_IO_EVAL_HPP
#define CONSENSUS_IO_EVAL_HPP

#include "consensus/grid.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace consensus::io {

/// Error thresholds in pixels; an estimate counts as wrong when its
/// absolute error is strictly greater than the threshold.
inline constexpr std::array<double, 4> kErrorThresholds = {2.0, 3.0, 4.0, 5.0};

struct ErrorStats {
  std::size_t pixels = 0;
  double avg_error = 0.0;
  std::array<double, 4> rate{};  // percent, per kErrorThresholds
  double rate_at(double threshold) const {
    for (std::size_t i = 0; i < kErrorThresholds.size(); ++i)
      if (kErrorThresholds[i] == threshold) return rate[i];
    throw std::invalid_argument("rate_at: threshold not tabulated");
  }
};

struct EvalReport {
  ErrorStats all;
  std::optional<ErrorStats> noc;
  std::optional<double> confidence_threshold;
  std::optional<ErrorStats> filtered_all;
  std::optional<ErrorStats> filtered_noc;
  double density = 100.0;  // percent of ground-truth pixels retained
};

namespace eval_detail {

template <typename Keep>
ErrorStats stats(const Grid<float>& est, const Grid<float>& gt,
                 const Grid<std::uint8_t>& gt_valid, Keep keep) {
  ErrorStats s;
  double sum = 0.0;
  std::array<std::size_t, 4> bad{};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt_valid[i] || !keep(i)) continue;
    const double err = std::abs(static_cast<double>(est[i]) - gt[i]);
    ++s.pixels;
    sum += err;
    for (std::size_t t = 0; t < kErrorThresholds.size(); ++t)
      if (err > kErrorThresholds[t]) ++bad[t];
  }
  if (s.pixels == 0) return s;
  s.avg_error = sum / static_cast<double>(s.pixels);
  for (std::size_t t = 0; t < bad.size(); ++t)
    s.rate[t] = 100.0 * static_cast<double>(bad[t]) / static_cast<double>(s.pixels);
  return s;
}

}  // namespace eval_detail

/// Metrics over ground-truth pixels, optionally restricted to a NOC mask,
/// and, when a confidence map and threshold are given, also over pixels
/// with |J_n| >= threshold.
inline EvalReport evaluate(const Grid<float>& estimate, const Grid<float>& gt,
                           const Grid<std::uint8_t>& gt_valid,
                           const Grid<std::uint8_t>* noc = nullptr,
                           const Grid<std::int32_t>* confidence = nullptr,
                           std::optional<double> confidence_threshold = {}) {
  if (!estimate.same_shape(gt) || !gt.same_shape(gt_valid) ||
      (noc && !noc->same_shape(gt)) || (confidence && !confidence->same_shape(gt))) {
    throw std::invalid_argument("evaluate: dimension mismatch");
  }
  const auto all = [](std::size_t) { return true; };
  EvalReport r;
  r.all = eval_detail::stats(estimate, gt, gt_valid, all);
  if (r.all.pixels == 0) throw std::invalid_argument("evaluate: no ground-truth pixels");
  const auto in_noc = [&](std::size_t i) { return (*noc)[i] != 0; };
  if (noc) r.noc = eval_detail::stats(estimate, gt, gt_valid, in_noc);

  if (confidence && confidence_threshold) {
    r.confidence_threshold = confidence_threshold;
    const double thr = *confidence_threshold;
    const auto keep = [&](std::size_t i) { return (*confidence)[i] >= thr; };
    const ErrorStats f = eval_detail::stats(estimate, gt, gt_valid, keep);
    r.density = 100.0 * static_cast<double>(f.pixels) / static_cast<double>(r.all.pixels);
    if (f.pixels > 0) r.filtered_all = f;
    if (noc) {
      const auto keep_noc = [&](std::size_t i) { return keep(i) && in_noc(i); };
      const ErrorStats fn = eval_detail::stats(estimate, gt, gt_valid, keep_noc);
      if (fn.pixels > 0) r.filtered_noc = fn;
    }
  }
  return r;
}

struct SweepRow {
  double threshold = 0.0;
  double density = 0.0;     // percent of GT pixels with |J_n| >= threshold
  double error_rate = 0.0;  // percent of those with error > error_threshold
  double avg_error = 0.0;
};

/// Retained density and error rate across confidence thresholds.
inline std::vector<SweepRow> confidence_sweep(const Grid<float>& estimate,
                                              const Grid<float>& gt,
                                              const Grid<std::uint8_t>& gt_valid,
                                              const Grid<std::int32_t>& confidence,
                                              const std::vector<double>& thresholds,
                                              double error_threshold = 3.0,
                                              const Grid<std::uint8_t>* mask = nullptr) {
  if (!estimate.same_shape(gt) || !gt.same_shape(gt_valid) ||
      !confidence.same_shape(gt) || (mask && !mask->same_shape(gt))) {
    throw std::invalid_argument("confidence_sweep: dimension mismatch");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < gt.size(); ++i)
    total += gt_valid[i] && (!mask || (*mask)[i]) ? 1 : 0;
  if (total == 0) throw std::invalid_argument("confidence_sweep: no ground-truth pixels");
  std::vector<SweepRow> rows;
  for (double thr : thresholds) {
    std::size_t kept = 0, bad = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (!gt_valid[i] || (mask && !(*mask)[i]) || confidence[i] < thr) continue;
      const double err = std::abs(static_cast<double>(estimate[i]) - gt[i]);
      ++kept;
      sum += err;
      if (err > error_threshold) ++bad;
    }
    SweepRow row;
    row.threshold = thr;
    row.density = 100.0 * static_cast<double>(kept) / static_cast<double>(total);
    if (kept > 0) {
      row.error_rate = 100.0 * static_cast<double>(bad) / static_cast<double>(kept);
      row.avg_error = sum / static_cast<double>(kept);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace consensus::io

#endif  // CONSENSUS_IO_EVAL_HPP
