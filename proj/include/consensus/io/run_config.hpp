#ifndef CONSENSUS_IO_RUN_CONFIG_HPP
#define CONSENSUS_IO_RUN_CONFIG_HPP

#include "consensus/local_model.hpp"
#include "consensus/stereo.hpp"

#include <CLI11.hpp>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace consensus::io {

struct RunConfig {
  std::string left;
  std::string right;
  std::string seed;          // external seed; empty means compute one
  std::string ground_truth;  // optional
  std::string noc;           // optional NOC ground truth / mask
  std::string outdir = "out";
  StereoParams stereo;
  bool audit_every_iteration = false;
  bool emit_inlier_masks = false;
  bool emit_cost_trace = true;
  std::vector<std::string> support_pixels;  // "x,y"
  double confidence_threshold = 200.0;

  /// Solver params with the mode flags applied.
  StereoParams effective_params() const {
    StereoParams p = stereo;
    if (audit_every_iteration) p.audit_every = 1;
    if (p.strict_deterministic) p.sgm.parallel = false;
    return p;
  }

  std::vector<Pixel> parsed_support_pixels() const {
    std::vector<Pixel> out;
    for (const std::string& s : support_pixels) {
      std::istringstream in(s);
      Pixel p;
      char comma = 0;
      if (!(in >> p.x >> comma >> p.y) || comma != ',' || !in.eof()) {
        throw CLI::ValidationError("support_pixels", "expected \"x,y\", got \"" + s + "\"");
      }
      out.push_back(p);
    }
    return out;
  }
};

/// Registers every RunConfig field as a long option whose name doubles as
/// the config-file key, plus --config. Unknown config keys are errors.
inline void bind_run_config(CLI::App& app, RunConfig& c) {
  app.set_config("--config", "", "Flat key = value configuration file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  app.add_option("--left", c.left, "Left (reference) image");
  app.add_option("--right", c.right, "Right image");
  app.add_option("--seed", c.seed, "Precomputed seed disparity PNG");
  app.add_option("--ground_truth", c.ground_truth, "Ground-truth disparity PNG");
  app.add_option("--noc", c.noc, "Non-occluded ground-truth disparity PNG (mask source)");
  app.add_option("--outdir", c.outdir, "Output directory")->capture_default_str();

  StereoParams& s = c.stereo;
  app.add_option("--tau0", s.tau0, "Outlier cost per pixel")->capture_default_str();
  app.add_option("--lambda", s.lambda, "Final consistency weight")->capture_default_str();
  app.add_option("--lambda0_ratio", s.lambda0_ratio, "Initial weight as a fraction of lambda")
      ->capture_default_str();
  app.add_option("--lambda_factor", s.lambda_factor, "Weight multiplier per plateau")
      ->capture_default_str();
  app.add_option("--lambda_interval", s.lambda_interval, "Iterations per plateau")
      ->capture_default_str();
  app.add_option("--occlusion_iteration", s.occlusion_iteration,
                 "Iteration after which occlusion correction runs")
      ->capture_default_str();
  app.add_option("--post_occlusion_iterations", s.post_occlusion_iterations,
                 "Iterations after the correction")
      ->capture_default_str();
  app.add_option("--occlusion_correction", s.occlusion_correction)->capture_default_str();
  app.add_option("--num_scales", s.num_scales, "Pyramid scales")->capture_default_str();
  app.add_option("--finest_side", s.finest_side, "Finest patch side")->capture_default_str();
  app.add_option("--coord_scale", s.coord_scale, "Coordinate divisor; 0 = max image side")
      ->capture_default_str();
  app.add_option("--audit_every", s.audit_every, "Evaluate L every k iterations")
      ->capture_default_str();
  app.add_option("--strict_deterministic", s.strict_deterministic,
                 "Single-threaded, fixed reduction order")
      ->capture_default_str();
  app.add_option("--snapshot_iterations", s.snapshot_iterations,
                 "Iterations whose consensus is saved")
      ->delimiter(',')
      ->expected(0, CLI::detail::expected_max_vector_size);

  SgmParams& g = s.sgm;
  app.add_option("--sgm_max_disparity", g.max_disparity)->capture_default_str();
  app.add_option("--sgm_alpha", g.alpha, "Census share of the matching cost")
      ->capture_default_str();
  app.add_option("--sgm_p1", g.p1)->capture_default_str();
  app.add_option("--sgm_p2", g.p2)->capture_default_str();
  app.add_option("--sgm_gradient_cap", g.gradient_cap)->capture_default_str();
  app.add_option("--sgm_census_radius", g.census_radius)->capture_default_str();
  app.add_option("--sgm_lr_tolerance", g.lr_tolerance)->capture_default_str();
  app.add_option("--sgm_jump_threshold", g.jump_threshold, "Seed discontinuity threshold (px)")
      ->capture_default_str();

  app.add_option("--audit_every_iteration", c.audit_every_iteration)->capture_default_str();
  app.add_option("--emit_inlier_masks", c.emit_inlier_masks)->capture_default_str();
  app.add_option("--emit_cost_trace", c.emit_cost_trace)->capture_default_str();
  app.add_option("--support_pixels", c.support_pixels, "Pixels \"x,y\" for support overlays")
      ->expected(0, CLI::detail::expected_max_vector_size);
  app.add_option("--confidence_threshold", c.confidence_threshold,
                 "|J_n| threshold for filtered metrics")
      ->capture_default_str();
}

}  // namespace consensus::io

#endif  // CONSENSUS_IO_RUN_CONFIG_HPP
