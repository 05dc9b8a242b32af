// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// non-zero when any criterion fails.
//
// Criterion 9 needs KITTI training data: set CONSENSUS_KITTI_DIR to a
// training directory (2015 layout image_2/image_3/disp_noc_0 or 2012 layout
// colored_0/colored_1/disp_noc). CONSENSUS_KITTI_MAX limits the pair count.

#include "consensus/bench.hpp"
#include "consensus/io/eval.hpp"
#include "consensus/io/image_io.hpp"
#include "consensus/local_model.hpp"
#include "consensus/op_count.hpp"
#include "consensus/oracle.hpp"
#include "consensus/region_pyramid.hpp"
#include "consensus/solver.hpp"
#include "consensus/stereo.hpp"
#include "consensus/synthetic.hpp"
#include "random_instance.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace consensus;
using consensus::testing::random_instance;
using consensus::testing::rel_err;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

Outcome verdict(bool ok, const std::string& detail) {
  return {ok ? Status::pass : Status::fail, detail};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

// 1 ---------------------------------------------------------------------

template <LocalModel Model>
void exactness_instance(const Model& model, int w, int h, std::uint32_t seed,
                        double& worst, bool& counts_exact) {
  auto inst = random_instance(w, h, 3, model, seed, 0.3 + 0.05 * (seed % 10));
  SceneMap<Model> scene(w, h);
  scene.z = inst.z;
  upsweep(inst.pyramid, inst.model, scene, inst.states, true);
  downsweep(inst.pyramid, inst.states, true);
  const auto fast = reconstruct_consensus(inst.pyramid, inst.model, inst.states, scene, true);

  const auto dense = oracle::naive_upsweep(inst.pyramid, inst.model, inst.z);
  const auto slow = oracle::naive_consensus(inst.pyramid, inst.model, inst.states, inst.z);
  const auto counts = oracle::naive_inlier_count(inst.pyramid, inst.states);

  for (int k = 0; k < 3; ++k) {
    const auto& s = inst.states.scales[k];
    for (std::size_t i = 0; i < s.size(); ++i) {
      worst = std::max(worst, rel_err(s.e[i], dense.e[k][i]));
      for (int m = 0; m < Model::kParamDim; ++m)
        worst = std::max(worst, rel_err(s.phi[i](m), dense.phi[k][i](m)));
      for (int r = 0; r < Model::kParamDim; ++r)
        for (int c = 0; c <= r; ++c)
          worst = std::max(worst, rel_err(s.moment[i](r, c), dense.moment[k][i](r, c)));
    }
  }
  for (std::size_t i = 0; i < fast.z.size(); ++i) {
    if (fast.count[i] != counts[i] || slow.count[i] != counts[i]) counts_exact = false;
    for (int d = 0; d < Model::kOutputDim; ++d)
      worst = std::max(worst, rel_err(fast.z[i](d), slow.z[i](d)));
  }
}

Outcome hierarchical_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  bool counts_exact = true;
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> side(32, 64);
  for (std::uint32_t s = 0; s < 20; ++s) {
    const int w = side(rng), h = side(rng);
    if (s % 2 == 0)
      exactness_instance(make_planar_disparity(64.0), w, h, s, worst, counts_exact);
    else
      exactness_instance(make_affine_flow(64.0), w, h, s, worst, counts_exact);
  }
  const double secs = seconds_since(t0);
  return verdict(worst < 1e-10 && counts_exact && secs < 30.0,
                 "20 instances, max rel err " + fmt(worst) + ", counts " +
                     (counts_exact ? "exact" : "MISMATCH") + ", " + fmt(secs) + " s");
}

// 2 ---------------------------------------------------------------------

Outcome monotone_descent() {
  double worst_rise = 0.0;
  int violations = 0;
  for (std::uint32_t s = 0; s < 10; ++s) {
    auto inst = random_instance(40, 40, 3, make_planar_disparity(40.0), 100 + s);
    SolverConfig cfg;
    cfg.lambda0 = cfg.lambda_final = 0.4;
    cfg.max_iters = 50;
    cfg.audit_every = 1;
    const auto res = run(cfg, inst.pyramid, inst.model, inst.states, inst.z);
    for (std::size_t t = 1; t < res.trace.size(); ++t) {
      const double prev = res.trace[t - 1].cost;
      const double rise = (res.trace[t].cost - prev) / std::abs(prev);
      worst_rise = std::max(worst_rise, rise);
      if (rise > 1e-9) ++violations;
    }
  }
  return verdict(violations == 0, "10 seeds x 50 iterations, largest relative rise " +
                                      fmt(worst_rise) + ", violations " +
                                      std::to_string(violations));
}

// 3 ---------------------------------------------------------------------

template <LocalModel Model>
double split_identity_gap(const Model& model, std::uint32_t seed, bool after_run) {
  auto inst = random_instance(48, 40, 3, model, seed);
  const double lambda = 0.4;
  RegionStates<Model> states = inst.states;
  if (after_run) {
    SolverConfig cfg;
    cfg.lambda0 = lambda / 64.0;
    cfg.lambda_final = lambda;
    cfg.lambda_interval = 2;
    cfg.max_iters = 12;
    states = run(cfg, inst.pyramid, inst.model, inst.states, inst.z).states;
  }
  const auto L = oracle::naive_cost_L(inst.pyramid, inst.model, states, lambda);
  const auto zbar = oracle::naive_consensus(inst.pyramid, inst.model, states, inst.z);
  const auto Lp = evaluate_cost_Lprime(inst.pyramid, inst.model, states, zbar.z, lambda);
  return std::abs(L.total() - Lp.total()) / std::abs(L.total());
}

Outcome split_identity() {
  double worst = 0.0;
  for (std::uint32_t s = 0; s < 6; ++s) {
    worst = std::max(worst, split_identity_gap(make_planar_disparity(48.0), 300 + s, s % 2));
    worst = std::max(worst, split_identity_gap(make_affine_flow(48.0), 400 + s, s % 2));
    worst = std::max(worst, split_identity_gap(make_quadratic_normals(48.0), 500 + s, s % 2));
  }
  return verdict(worst < 1e-8, "18 instances (3 models, random and solved states), max |L-L'|/|L| " +
                                   fmt(worst));
}

// 4 ---------------------------------------------------------------------

Outcome coverage_count() {
  const auto pyr = build_pyramid(256, 256, 5, 4);
  std::size_t interior = 0, wrong = 0;
  // every region inlier: |J_n| from the solver's own reconstruction
  auto st = make_region_states(pyr, make_planar_disparity(256.0));
  for (auto& s : st.scales) std::fill(s.inlier.begin(), s.inlier.end(), 1);
  downsweep(pyr, st);
  const auto cons =
      reconstruct_consensus(pyr, make_planar_disparity(256.0), st,
                            SceneMap<PlanarDisparity>(256, 256));
  for (int y = 63; y <= 256 - 64; ++y)
    for (int x = 63; x <= 256 - 64; ++x) {
      ++interior;
      if (pyr.covering_regions({x, y}).size() != 5456 || cons.count(x, y) != 5456) ++wrong;
    }
  const auto small = build_pyramid(128, 128, 5, 4);
  const std::size_t at64 = small.covering_regions({64, 64}).size();
  return verdict(wrong == 0 && at64 == 5456,
                 std::to_string(interior) + " interior pixels of 256x256 checked, " +
                     std::to_string(wrong) + " differ from 5456; (64,64) in 128x128 -> " +
                     std::to_string(at64));
}

// 5 ---------------------------------------------------------------------

Outcome schedule_benefit() {
  const synthetic::TwoPlaneScene scene;
  synthetic::SeedNoise noise;
  noise.gross = 0.01;
  const SeedField seed = synthetic::noisy_seed(scene.truth(), noise, 42);
  const Image left = synthetic::texture(scene.width, scene.height, 5);

  StereoParams sched;
  sched.audit_every = 1;
  StereoParams direct = sched;
  direct.lambda0_ratio = 1.0;
  const auto rs = run_stereo_from_seed(left, seed, sched);
  const auto rd = run_stereo_from_seed(left, seed, direct);
  const double ls = rs.trace.back().cost;
  const double ld = rd.trace.back().cost;

  // outlier totals at the last iteration of each λ' plateau
  std::vector<std::size_t> ends;
  for (std::size_t t = 0; t < rs.trace.size(); ++t) {
    const bool last = t + 1 == rs.trace.size() ||
                      rs.trace[t + 1].lambda_prime != rs.trace[t].lambda_prime;
    if (!last) continue;
    std::size_t n = 0;
    for (auto c : rs.trace[t].outliers_per_scale) n += c;
    ends.push_back(n);
  }
  const bool monotone = std::is_sorted(ends.begin(), ends.end());
  std::string seq;
  for (auto n : ends) seq += (seq.empty() ? "" : " ") + std::to_string(n);
  return verdict(ls <= ld && monotone && ends.size() >= 7,
                 "final L scheduled " + fmt(ls, 10) + " vs direct " + fmt(ld, 10) +
                     "; plateau-end outliers " + seq);
}

// 6 ---------------------------------------------------------------------

Outcome synthetic_accuracy() {
  const synthetic::TwoPlaneScene scene;
  const Grid<float> truth = scene.truth();
  const SeedField seed = synthetic::noisy_seed(truth, {}, 42);
  const Image left = synthetic::texture(scene.width, scene.height, 5);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_stereo_from_seed(left, seed, StereoParams{});
  const double secs = seconds_since(t0);

  std::size_t far = 0, good = 0;
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x) {
      // pixel centre distance to the crease line at x = crease - 0.5
      if (std::abs(x - (scene.crease - 0.5)) <= 4.0) continue;
      ++far;
      if (std::abs(r.disparity(x, y) - truth(x, y)) <= 0.25) ++good;
    }
  const double pct = 100.0 * good / far;

  const int k64 = 4;  // side 4·2^4
  const ScaleGeometry& g = r.pyramid.scale(k64);
  std::size_t straddle = 0, inliers = 0;
  for (int ay = 0; ay < g.grid_height; ++ay)
    for (int ax = 0; ax < g.grid_width; ++ax) {
      if (!(ax < scene.crease && ax + g.side > scene.crease)) continue;
      ++straddle;
      if (r.states.scales[k64].inlier[g.index(ax, ay)]) ++inliers;
    }
  return verdict(pct >= 95.0 && inliers == 0 && straddle > 0 && secs < 60.0,
                 fmt(pct, 5) + "% within 0.25 px; " + std::to_string(inliers) + " of " +
                     std::to_string(straddle) + " straddling 64x64 regions inlier; " +
                     fmt(secs) + " s");
}

// 7 ---------------------------------------------------------------------

Outcome confidence_trend() {
  const synthetic::TwoPlaneScene scene;
  const Grid<float> truth = scene.truth();
  auto [left, right] = synthetic::render_pair(truth, 12);
  std::mt19937 rng(9);
  std::normal_distribution<float> g(0.0f, 8.0f);
  for (auto& v : left) v = std::clamp(v + g(rng), 0.0f, 255.0f);
  for (auto& v : right) v = std::clamp(v + g(rng), 0.0f, 255.0f);
  StereoParams p;
  p.sgm.max_disparity = 64;
  const auto r = run_stereo(left, right, p);

  const std::int32_t mx = *std::max_element(r.confidence.begin(), r.confidence.end());
  std::vector<double> thr;
  for (int i = 0; i < 12; ++i) thr.push_back(std::round(static_cast<double>(mx) * i / 12.0));
  const Grid<std::uint8_t> all(truth.width(), truth.height(), 1);
  const auto rows = io::confidence_sweep(r.disparity, truth, all, r.confidence, thr);
  bool ok = rows.size() >= 10;
  std::string curve;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].error_rate > rows[i - 1].error_rate) ok = false;
    if (i > 0 && rows[i].density > rows[i - 1].density) ok = false;
    if (i < 4) curve += fmt(rows[i].error_rate) + "%@" + fmt(rows[i].density) + "% ";
  }
  return verdict(ok, std::to_string(rows.size()) + " thresholds up to " + std::to_string(mx) +
                         "; >3px rate@density: " + curve + "...; last " +
                         fmt(rows.back().error_rate) + "%@" + fmt(rows.back().density) + "%");
}

// 8 ---------------------------------------------------------------------

Outcome complexity() {
  std::vector<double> ratios;
  for (int k : {4, 6, 8}) {
    oracle::DyadicInstance inst;
    inst.num_pixels = 1024;
    inst.num_scales = k;
    std::mt19937 rng(k);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    inst.z.resize(1024);
    for (double& v : inst.z) v = u(rng);
    inst.theta.resize(k);
    inst.inlier.resize(k);
    for (int s = 0; s < k; ++s)
      for (int x = 0; x < inst.count(s); ++x) {
        inst.theta[s].push_back(u(rng));
        inst.inlier[s].push_back(u(rng) < 0.7);
      }
    const double n = static_cast<double>(
        oracle::count_operations(oracle::AggregationMode::naive, inst).additions);
    const double h = static_cast<double>(
        oracle::count_operations(oracle::AggregationMode::hierarchical, inst).additions);
    ratios.push_back(h / n);
  }
  const bool shrinking = ratios[1] < ratios[0] && ratios[2] < ratios[1];
  const SweepTiming t = time_sweeps(256, 256, 5);
  return verdict(shrinking && t.speedup() >= 10.0 && t.max_rel_diff < 1e-10,
                 "op ratio K=4,6,8: " + fmt(ratios[0]) + ", " + fmt(ratios[1]) + ", " +
                     fmt(ratios[2]) + "; 256x256 K=5 hierarchical " +
                     fmt(t.hierarchical_seconds) + " s vs naive " + fmt(t.naive_seconds) +
                     " s (" + fmt(t.speedup()) + "x)");
}

// 9 ---------------------------------------------------------------------

struct KittiPair {
  std::string left, right, noc;
};

std::vector<KittiPair> kitti_pairs(const fs::path& root) {
  const std::vector<std::array<const char*, 3>> layouts = {
      {"image_2", "image_3", "disp_noc_0"},
      {"colored_0", "colored_1", "disp_noc"},
      {"image_0", "image_1", "disp_noc"}};
  std::vector<KittiPair> out;
  for (const auto& l : layouts) {
    if (!fs::is_directory(root / l[0]) || !fs::is_directory(root / l[2])) continue;
    for (const auto& e : fs::directory_iterator(root / l[2])) {
      const std::string name = e.path().filename().string();
      if (e.path().extension() != ".png") continue;
      const fs::path lp = root / l[0] / name, rp = root / l[1] / name;
      if (fs::exists(lp) && fs::exists(rp)) out.push_back({lp.string(), rp.string(), e.path().string()});
    }
    break;
  }
  std::sort(out.begin(), out.end(),
            [](const KittiPair& a, const KittiPair& b) { return a.left < b.left; });
  return out;
}

Outcome kitti_smoke() {
  const char* dir = std::getenv("CONSENSUS_KITTI_DIR");
  if (!dir || !*dir) return {Status::skip, "CONSENSUS_KITTI_DIR not set; no KITTI pairs supplied"};
  auto pairs = kitti_pairs(dir);
  if (const char* mx = std::getenv("CONSENSUS_KITTI_MAX"))
    if (std::atoi(mx) > 0 && pairs.size() > static_cast<std::size_t>(std::atoi(mx)))
      pairs.resize(std::atoi(mx));
  if (pairs.empty()) return {Status::skip, std::string("no KITTI pairs found under ") + dir};

  double sum_noc = 0.0, sum_filtered = 0.0, slowest = 0.0;
  for (const KittiPair& kp : pairs) {
    const Image left = io::load_image(kp.left);
    const Image right = io::load_image(kp.right);
    const auto [gt, valid] = io::load_disparity(kp.noc);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_stereo(left, right, StereoParams{});
    slowest = std::max(slowest, seconds_since(t0));
    const auto rep = io::evaluate(r.disparity, gt, valid, nullptr, &r.confidence, 200.0);
    sum_noc += rep.all.rate_at(3.0);
    sum_filtered += rep.filtered_all ? rep.filtered_all->rate_at(3.0) : 0.0;
  }
  const double noc = sum_noc / pairs.size();
  const double filtered = sum_filtered / pairs.size();
  return verdict(slowest < 60.0 && noc < 10.0 && filtered < noc,
                 std::to_string(pairs.size()) + " pairs; NOC >3px " + fmt(noc) +
                     "%, filtered (|J_n|>=200) " + fmt(filtered) + "%; slowest pair " +
                     fmt(slowest) + " s");
}

// 10 --------------------------------------------------------------------

Outcome occlusion_contract() {
  synthetic::OccluderScene scene;
  scene.foreground = 40;  // 32 px of background hidden left of the bar
  const Grid<float> truth = scene.truth();
  std::size_t raised = 0, checked = 0;
  std::string detail;
  bool lower = true;
  for (std::uint32_t s : {1u, 2u, 3u}) {
    const auto [left, right] = scene.render(s);
    StereoParams p;
    p.sgm.max_disparity = 64;
    const SeedField seed = compute_seed(left, right, p.sgm);
    const auto with = run_stereo_from_seed(left, seed, p);
    p.occlusion_correction = false;
    const auto without = run_stereo_from_seed(left, seed, p);

    const auto& before = *with.diagnostics.before_occlusion;
    const auto& after = *with.diagnostics.after_occlusion;
    for (std::size_t i = 0; i < seed.valid.size(); ++i) {
      if (seed.valid[i]) continue;
      ++checked;
      if (after[i] > before[i]) ++raised;
    }
    double ew = 0.0, eo = 0.0;
    int n = 0;
    for (int y = 0; y < scene.height; ++y)
      for (int x = scene.occluded_begin(); x < scene.occluded_end(); ++x) {
        ew += std::abs(with.disparity(x, y) - truth(x, y));
        eo += std::abs(without.disparity(x, y) - truth(x, y));
        ++n;
      }
    ew /= n;
    eo /= n;
    if (!(ew < eo)) lower = false;
    detail += " " + fmt(ew) + "<" + fmt(eo);
  }
  return verdict(raised == 0 && lower && checked > 0,
                 std::to_string(raised) + " of " + std::to_string(checked) +
                     " LR-invalid pixels raised; occluded mean error hook<no-hook:" + detail);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"hierarchical exactness", hierarchical_exactness},
      {"monotone descent", monotone_descent},
      {"split-cost identity", split_identity},
      {"coverage count", coverage_count},
      {"lambda schedule benefit", schedule_benefit},
      {"synthetic stereo accuracy", synthetic_accuracy},
      {"confidence trend", confidence_trend},
      {"hierarchical vs naive cost", complexity},
      {"KITTI smoke gate", kitti_smoke},
      {"occlusion correction", occlusion_contract},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::skip ? "SKIP" : "FAIL";
    if (o.status == Status::fail) ++failed;
    std::cout << "[" << tag << "] " << std::setw(2) << i + 1 << " " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
