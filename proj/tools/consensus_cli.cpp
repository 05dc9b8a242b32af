// consensus: seed, run, eval, sweep-confidence and bench verbs.
//
// Exit codes: 0 success, 1 usage, 2 data error.

#include "consensus/bench.hpp"
#include "consensus/io/diagnostics.hpp"
#include "consensus/io/eval.hpp"
#include "consensus/io/image_io.hpp"
#include "consensus/io/run_config.hpp"
#include "consensus/io/seed_io.hpp"
#include "consensus/op_count.hpp"
#include "consensus/stereo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace consensus;
using namespace consensus::io;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(const std::string& value, const char* option) {
  if (value.empty()) throw UsageError(std::string("missing required option --") + option);
}

// 16-bit inputs are brought to the 8-bit range the cost parameters assume.
Image load_gray(const std::string& path) {
  const RawImage raw = read_raw(path);
  Image img = to_gray(raw);
  if (raw.bit_depth > 8) {
    const float s = 255.0f / 65535.0f;
    for (float& v : img) v *= s;
  }
  return img;
}

std::pair<Grid<float>, Grid<std::uint8_t>> load_gt(const std::string& path) {
  return load_disparity(path);
}

json stats_json(const ErrorStats& s) {
  json j;
  j["pixels"] = s.pixels;
  j["avg_error"] = s.avg_error;
  for (std::size_t i = 0; i < kErrorThresholds.size(); ++i)
    j["rate_gt_" + std::to_string(static_cast<int>(kErrorThresholds[i])) + "px"] = s.rate[i];
  return j;
}

json report_json(const EvalReport& r) {
  json j;
  j["all"] = stats_json(r.all);
  if (r.noc) j["noc"] = stats_json(*r.noc);
  if (r.confidence_threshold) {
    j["confidence_threshold"] = *r.confidence_threshold;
    j["density"] = r.density;
    if (r.filtered_all) j["filtered_all"] = stats_json(*r.filtered_all);
    if (r.filtered_noc) j["filtered_noc"] = stats_json(*r.filtered_noc);
  }
  return j;
}

void print_stats(const char* label, const ErrorStats& s) {
  std::cout << std::left << std::setw(14) << label << std::right << std::fixed
            << std::setprecision(3) << std::setw(10) << s.avg_error;
  for (double r : s.rate) std::cout << std::setw(9) << std::setprecision(2) << r;
  std::cout << std::setw(10) << s.pixels << '\n';
}

void print_report(const EvalReport& r) {
  std::cout << std::left << std::setw(14) << "set" << std::right << std::setw(10) << "avg px"
            << std::setw(9) << ">2px" << std::setw(9) << ">3px" << std::setw(9) << ">4px"
            << std::setw(9) << ">5px" << std::setw(10) << "pixels" << '\n';
  print_stats("all", r.all);
  if (r.noc) print_stats("noc", *r.noc);
  if (r.filtered_all) print_stats("all|J|>=thr", *r.filtered_all);
  if (r.filtered_noc) print_stats("noc|J|>=thr", *r.filtered_noc);
  if (r.confidence_threshold)
    std::cout << "density at |J_n| >= " << *r.confidence_threshold << ": "
              << std::setprecision(2) << r.density << "%\n";
}

EvalReport evaluate_files(const Grid<float>& est, const RunConfig& cfg,
                          const Grid<std::int32_t>* confidence) {
  const auto [gt, gt_valid] = load_gt(cfg.ground_truth);
  std::optional<Grid<std::uint8_t>> noc;
  if (!cfg.noc.empty()) noc = load_gt(cfg.noc).second;
  std::optional<double> thr;
  if (confidence) thr = cfg.confidence_threshold;
  try {
    return evaluate(est, gt, gt_valid, noc ? &*noc : nullptr, confidence, thr);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

int cmd_seed(const RunConfig& cfg, const std::string& output) {
  require(cfg.left, "left");
  require(cfg.right, "right");
  const Image left = load_gray(cfg.left);
  const Image right = load_gray(cfg.right);
  if (!left.same_shape(right)) throw DataError("left and right image sizes differ");
  const StereoParams p = cfg.effective_params();
  const SeedField seed = compute_seed(left, right, p.sgm);
  const std::string path = output.empty() ? (fs::path(cfg.outdir) / "seed.png").string() : output;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  save_seed(seed, path);
  std::cout << "seed: " << seed.valid_count() << " / " << seed.z.size()
            << " pixels valid, written to " << path << '\n';
  return 0;
}

int cmd_run(const RunConfig& cfg) {
  require(cfg.left, "left");
  if (cfg.seed.empty()) require(cfg.right, "right (or --seed)");
  const StereoParams p = cfg.effective_params();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto support = cfg.parsed_support_pixels();
  const Image left = load_gray(cfg.left);

  StereoResult res;
  if (!cfg.seed.empty()) {
    SeedField seed = load_seed(cfg.seed, p.sgm.jump_threshold);
    if (!seed.z.same_shape(left)) throw DataError("seed and left image sizes differ");
    res = run_stereo_from_seed(left, std::move(seed), p);
  } else {
    const Image right = load_gray(cfg.right);
    if (!left.same_shape(right)) throw DataError("left and right image sizes differ");
    res = run_stereo(left, right, p);
  }

  fs::create_directories(cfg.outdir);
  const fs::path out(cfg.outdir);
  write_disparity(res.disparity, (out / "disparity.png").string());
  write_confidence(res.confidence, (out / "confidence.png").string());
  if (cfg.seed.empty()) save_seed(res.seed, (out / "seed.png").string());

  DiagnosticsRequest req;
  req.inlier_masks = cfg.emit_inlier_masks;
  req.cost_trace = cfg.emit_cost_trace;
  req.support_pixels = support;
  req.snapshots = res.diagnostics.snapshots;
  emit_diagnostics(res.pyramid, res.states, res.confidence, res.trace, left,
                   (out / "diagnostics").string(), req);

  const auto& d = res.diagnostics;
  std::cout << std::fixed << std::setprecision(2) << "seed " << d.seed_seconds << " s, setup "
            << d.setup_seconds << " s, solve " << d.solve_seconds << " s; seed density "
            << 100.0 * d.seed_valid / res.disparity.size() << "%\n";
  if (!res.trace.empty() && !std::isnan(res.trace.back().cost))
    std::cout << "final L = " << std::setprecision(6) << res.trace.back().cost << '\n';

  json summary;
  summary["seed_seconds"] = d.seed_seconds;
  summary["setup_seconds"] = d.setup_seconds;
  summary["solve_seconds"] = d.solve_seconds;
  summary["seed_valid"] = d.seed_valid;
  summary["singular_updates"] = d.singular_updates;
  if (!cfg.ground_truth.empty()) {
    const EvalReport r = evaluate_files(res.disparity, cfg, &res.confidence);
    print_report(r);
    summary["eval"] = report_json(r);
  }
  std::ofstream((out / "summary.json").string()) << summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& disparity,
             const std::string& confidence, const std::string& json_out) {
  require(disparity, "disparity");
  require(cfg.ground_truth, "ground_truth");
  const Grid<float> est = load_disparity(disparity).first;
  std::optional<Grid<std::int32_t>> conf;
  if (!confidence.empty()) conf = load_confidence(confidence);
  const EvalReport r = evaluate_files(est, cfg, conf ? &*conf : nullptr);
  print_report(r);
  if (!json_out.empty()) std::ofstream(json_out) << report_json(r).dump(2) << '\n';
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& disparity,
              const std::string& confidence, std::vector<double> thresholds, int steps,
              double error_threshold, const std::string& csv_out) {
  require(disparity, "disparity");
  require(confidence, "confidence");
  require(cfg.ground_truth, "ground_truth");
  const Grid<float> est = load_disparity(disparity).first;
  const Grid<std::int32_t> conf = load_confidence(confidence);
  const auto [gt, gt_valid] = load_gt(cfg.ground_truth);
  std::optional<Grid<std::uint8_t>> noc;
  if (!cfg.noc.empty()) noc = load_gt(cfg.noc).second;
  if (thresholds.empty()) {
    if (steps < 1) throw UsageError("--steps must be >= 1");
    const auto mx = *std::max_element(conf.begin(), conf.end());
    for (int i = 0; i < steps; ++i)
      thresholds.push_back(std::round(static_cast<double>(mx) * i / steps));
  }
  std::sort(thresholds.begin(), thresholds.end());
  std::vector<SweepRow> rows;
  try {
    rows = confidence_sweep(est, gt, gt_valid, conf, thresholds, error_threshold,
                            noc ? &*noc : nullptr);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  std::ofstream file;
  if (!csv_out.empty()) {
    file.open(csv_out);
    if (!file) throw DataError("cannot write " + csv_out);
  }
  std::ostream& os = csv_out.empty() ? std::cout : file;
  os << "threshold,density_percent,error_rate_percent,avg_error\n";
  for (const SweepRow& r : rows)
    os << r.threshold << ',' << r.density << ',' << r.error_rate << ',' << r.avg_error << '\n';
  return 0;
}

int cmd_bench(const std::vector<int>& sizes, int scales, const std::vector<int>& op_scales,
              int op_pixels, bool parallel) {
  std::cout << "addition counts, 1-D dyadic pyramid, N = " << op_pixels << "\n";
  std::cout << std::setw(4) << "K" << std::setw(16) << "naive" << std::setw(16)
            << "hierarchical" << std::setw(10) << "ratio" << '\n';
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k : op_scales) {
    oracle::DyadicInstance inst;
    inst.num_pixels = op_pixels;
    inst.num_scales = k;
    if (k < 1 || inst.length(k - 1) > op_pixels)
      throw UsageError("--op_scales: K=" + std::to_string(k) + " does not fit N");
    inst.z.resize(op_pixels);
    for (double& v : inst.z) v = u(rng);
    inst.theta.resize(k);
    inst.inlier.resize(k);
    for (int s = 0; s < k; ++s)
      for (int x = 0; x < inst.count(s); ++x) {
        inst.theta[s].push_back(u(rng));
        inst.inlier[s].push_back(u(rng) < 0.7);
      }
    const auto n = oracle::count_operations(oracle::AggregationMode::naive, inst).additions;
    const auto h =
        oracle::count_operations(oracle::AggregationMode::hierarchical, inst).additions;
    std::cout << std::setw(4) << k << std::setw(16) << n << std::setw(16) << h
              << std::setw(10) << std::setprecision(4) << std::fixed
              << static_cast<double>(h) / static_cast<double>(n) << '\n';
  }
  std::cout << "\nwall clock, one aggregation pass, K = " << scales
            << (parallel ? " (parallel)" : " (single thread)") << '\n';
  std::cout << std::setw(10) << "size" << std::setw(14) << "hier s" << std::setw(14)
            << "naive s" << std::setw(10) << "speedup" << std::setw(12) << "max rel" << '\n';
  for (int n : sizes) {
    if (n < 4 << (scales - 1)) throw UsageError("--sizes: image too small for the pyramid");
    const SweepTiming t = time_sweeps(n, n, scales, 1, parallel);
    std::cout << std::setw(10) << (std::to_string(n) + "x" + std::to_string(n))
              << std::setw(14) << std::setprecision(4) << t.hierarchical_seconds
              << std::setw(14) << t.naive_seconds << std::setw(10) << std::setprecision(1)
              << t.speedup() << std::setw(12) << std::scientific << std::setprecision(1)
              << t.max_rel_diff << std::fixed << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical consensus stereo"};
  app.require_subcommand(1);
  RunConfig cfg;
  bind_run_config(app, cfg);

  std::string seed_out;
  auto* seed = app.add_subcommand("seed", "Compute and save the SGM seed");
  seed->add_option("-o,--output", seed_out, "Seed PNG path (default <outdir>/seed.png)");

  auto* run = app.add_subcommand("run", "Full pipeline: seed, solve, write outputs");

  std::string disparity, confidence, json_out;
  auto* ev = app.add_subcommand("eval", "Error metrics against ground truth");
  ev->add_option("--disparity", disparity, "Estimated disparity PNG");
  ev->add_option("--confidence", confidence, "Confidence PNG; enables filtered metrics");
  ev->add_option("--json", json_out, "Also write the report as JSON");

  std::vector<double> thresholds;
  int steps = 20;
  double error_threshold = 3.0;
  std::string csv_out;
  auto* sweep = app.add_subcommand("sweep-confidence",
                                   "Density and error rate across |J_n| thresholds (CSV)");
  sweep->add_option("--disparity", disparity, "Estimated disparity PNG");
  sweep->add_option("--confidence", confidence, "Confidence PNG");
  sweep->add_option("--thresholds", thresholds, "Explicit thresholds")->delimiter(',');
  sweep->add_option("--steps", steps, "Evenly spaced thresholds from 0 to max |J_n|")
      ->capture_default_str();
  sweep->add_option("--error_threshold", error_threshold, "Error counted when > this (px)")
      ->capture_default_str();
  sweep->add_option("-o,--output", csv_out, "CSV path (default stdout)");

  std::vector<int> sizes = {64, 128, 256};
  int bench_scales = 5;
  std::vector<int> op_scales = {4, 6, 8};
  int op_pixels = 1024;
  bool bench_parallel = false;
  auto* bench = app.add_subcommand("bench", "Hierarchical versus naive aggregation");
  bench->add_option("--sizes", sizes, "Square image sides")->delimiter(',')
      ->capture_default_str();
  bench->add_option("--scales", bench_scales, "Pyramid scales")->capture_default_str();
  bench->add_option("--op_scales", op_scales, "K values for addition counts")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--op_pixels", op_pixels, "N for addition counts")->capture_default_str();
  bench->add_flag("--parallel", bench_parallel, "Use OpenMP in both paths");

  for (auto* sub : {seed, run, ev, sweep, bench}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*seed) return cmd_seed(cfg, seed_out);
    if (*run) return cmd_run(cfg);
    if (*ev) return cmd_eval(cfg, disparity, confidence, json_out);
    if (*sweep)
      return cmd_sweep(cfg, disparity, confidence, thresholds, steps, error_threshold, csv_out);
    if (*bench) return cmd_bench(sizes, bench_scales, op_scales, op_pixels, bench_parallel);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 1;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
