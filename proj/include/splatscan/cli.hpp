// Command implementations behind the splatscan binary. Kept in the library so
// tests can drive them directly; each throws on failure and the binary maps
// that to a nonzero exit.
#pragma once

#include <string>

#include "splatscan/config.hpp"

namespace splatscan {

// Writes scene.json, viewpoint previews (PPM) from 4 canonical views and the
// config manifest into out_dir.
void cmd_scene_gen(const RunConfig& cfg);

// Non-active baseline: fits the ground-truth scene from the first n_total
// candidate views and writes a checkpoint plus a metric report.
void cmd_fit(const RunConfig& cfg);

// Full active reconstruction run: run log, per-round score CSV, selected-view
// sequence, curve CSV, checkpoints, final metric report.
void cmd_active_run(const RunConfig& cfg);

// Runs {full, no_depth_uq, no_depth_blending, depth_squared} over shared seeds
// and writes the comparison table CSV.
void cmd_ablate(const RunConfig& cfg);

// Recomputes metrics from the checkpoints of a finished run directory and
// verifies they match the stored report within 1e-9.
void cmd_eval(const std::string& run_dir);

// Renders the ground-truth scene from 4 canonical views, writing PPM and raw
// float32 images.
void cmd_render(const RunConfig& cfg);

// Builds the predictor for the configured policy. For the trained kind with
// no model paths set, fits a regressor on scenes disjoint from the target
// (seed offset) and saves the models into out_dir.
Predictor make_predictor(const RunConfig& cfg, const Scene& gt_scene);

}  // namespace splatscan
