// Experiment configuration: one JSON document covering scene synthesis,
// candidates, schedule, optimizer, scoring and policy. Every tunable that the
// pipeline depends on surfaces here; a stable hash of the canonical dump is
// recorded in all outputs.
#pragma once

#include <cstdint>
#include <string>

#include "splatscan/planner.hpp"
#include "splatscan/scene_gen.hpp"

namespace splatscan {

struct RunConfig {
    uint64_t seed = 1;
    std::string out_dir = "out";
    int width = 64, height = 64;
    double fov_x_deg = 50.0;

    // Ground-truth scene synthesis.
    SceneLayout layout = SceneLayout::OccludedCavity;
    int scene_gaussians = 200;
    Vec3 bounds = Vec3::Ones();

    // Candidate and test viewpoints.
    int candidate_count = 64;
    int test_view_count = 32;
    double view_radius = 2.5;
    bool hemisphere = false;

    // Policy.
    std::string policy = "uq";  // random | oracle_ssim | uq
    std::string predictor = "oracle";
    std::string ablation = "none";
    std::string model_r_path, model_d_path;  // trained predictor artifacts
    bool initial_views_random = false;

    ScoreWeights weights;
    bool normalize_depth = true;
    std::string blend_mode = "linear";

    OptimConfig optim;
    RenderConfig render;
    int model_init_gaussians = 300;

    // Ablation / acceptance statistics.
    int ablate_seeds = 5;
};

RunConfig default_run_config();

std::string run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

// FNV-1a over the canonical (sorted-key) JSON dump, rendered as hex.
std::string run_config_hash(const RunConfig& c);

// Derived pieces used by the commands.
CameraIntrinsics config_intrinsics(const RunConfig& c);
SceneSpec config_scene_spec(const RunConfig& c);
ScoringConfig config_scoring(const RunConfig& c);
Schedule config_schedule(const RunConfig& c);
Policy config_policy(const RunConfig& c);

// Candidate/test viewpoints draw from distinct substreams so the two sets
// never coincide by pose.
ViewpointSet config_candidates(const RunConfig& c);
std::vector<Camera> config_test_views(const RunConfig& c);

}  // namespace splatscan
