// Per-pixel render uncertainty (R) and depth uncertainty (D) predictors:
// an oracle computed against ground truth, a feature-based heuristic usable
// without ground truth, and a trained per-pixel ridge regressor on the same
// features.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "splatscan/image.hpp"
#include "splatscan/optimizer.hpp"
#include "splatscan/renderer.hpp"
#include "splatscan/scene_gen.hpp"
#include "splatscan/types.hpp"

namespace splatscan {

// Uncertainty maps are H x W x 1 images with values in [0, 1].
using UncertaintyMap = Image;

// Maps SSIM in [-1, 1] to uncertainty in [0, 1]; high where similarity is low.
inline double uncertainty_from_ssim(double s) {
    double u = (1.0 - s) / 2.0;
    return u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
}

// clamp((1 - ssim_map(rendered, gt)) / 2, 0, 1). Throws on dimension mismatch.
UncertaintyMap oracle_uncertainty(const Image& rendered, const Image& gt);

// Depth-error oracle: clamp(|rendered_depth - gt_depth| / depth_scale, 0, 1).
UncertaintyMap oracle_depth_uncertainty(const Image& rendered_depth, const Image& gt_depth,
                                        double depth_scale);

// Feature configuration shared by the heuristic and the trained regressor.
// Unbounded features are squashed with tanh at fixed scales; nothing is ever
// rescaled by a per-image max.
struct FeatureConfig {
    double var_scale = 0.01;   // 3x3 luminance variance
    double lap_scale = 0.25;   // Laplacian magnitude
    double grad_scale = 0.10;  // normalized-depth gradient magnitude
    double depth_scale = 1.0;  // world units per normalized depth unit
    // Heuristic mixing weights (each set sums to 1).
    double w_var = 0.35, w_lap = 0.30, w_cov = 0.35;  // render map
    double wd_grad = 0.6, wd_cov = 0.4;               // depth map
};

// Per-pixel feature planes, in this order:
//   color_var, laplacian, one_minus_alpha, depth_grad,
//   mean_r, mean_g, mean_b, mean_depth
std::vector<std::string> uncertainty_feature_names();
std::vector<Image> uncertainty_features(const RenderResult& rr, const FeatureConfig& cfg);

// Ground-truth-free predictor: fixed mixes of the bounded features.
std::pair<UncertaintyMap, UncertaintyMap> heuristic_uncertainty(const RenderResult& rr,
                                                                const FeatureConfig& cfg);

struct PatchRegressorModel {
    std::vector<std::string> feature_names;
    std::vector<double> weights;  // one per feature
    double bias = 0.0;
    std::vector<double> norm_mean, norm_std;  // per-feature normalization
};

std::string model_to_json(const PatchRegressorModel& m);
PatchRegressorModel model_from_json(const std::string& text);
void save_model(const PatchRegressorModel& m, const std::string& path);
PatchRegressorModel load_model(const std::string& path);

struct UqSample {
    RenderResult render;
    UncertaintyMap oracle_r;
    UncertaintyMap oracle_d;
};

struct UqDataset {
    std::vector<UqSample> samples;
};

// Quality-ladder dataset: for each entry of train_view_counts, fit a model
// from that many views of the ground-truth scene, render the holdout views
// and pair them with oracle maps.
struct BuildConfig {
    CameraIntrinsics intrinsics;
    double view_radius = 2.5;
    int fit_iters = 800;
    int n_init_gaussians = 150;
    Vec3 init_bounds = Vec3::Ones();
    OptimConfig optim;
    RenderConfig render;
    double depth_scale = 0.0;  // 0: use the ground-truth scene diameter
};

UqDataset build_training_set(const Scene& gt_scene, const std::vector<int>& train_view_counts,
                             const std::vector<Camera>& holdout_views, uint64_t seed,
                             const BuildConfig& bc);

// Dataset cache: float32 raw dumps plus an index JSON.
void save_dataset(const UqDataset& ds, const std::string& dir);
UqDataset load_dataset(const std::string& dir);

enum class RegressionTarget { Render, Depth };

// Closed-form ridge regression of the oracle map on the per-pixel features.
// Warns (stderr) and retries with a larger lambda if the normal matrix is
// near-singular.
PatchRegressorModel train_patch_regressor(const UqDataset& ds, RegressionTarget target,
                                          const FeatureConfig& fc, double lambda_ridge = 1e-3);

UncertaintyMap predict(const PatchRegressorModel& m, const RenderResult& rr,
                       const FeatureConfig& fc);

// Uniform interface over the three predictor kinds used by the planner.
enum class PredictorKind { Oracle, Heuristic, Trained };

PredictorKind parse_predictor_kind(const std::string& name);
std::string predictor_kind_name(PredictorKind k);

struct Predictor {
    PredictorKind kind = PredictorKind::Heuristic;
    const Scene* gt_scene = nullptr;  // oracle only
    PatchRegressorModel model_r, model_d;  // trained only
    FeatureConfig features;
    RenderConfig render_cfg;

    // gt_render, when non-null, is the cached ground-truth render at `cam`
    // (used by the oracle kind to avoid re-rendering).
    std::pair<UncertaintyMap, UncertaintyMap> evaluate(const RenderResult& rr, const Camera& cam,
                                                       const RenderResult* gt_render = nullptr) const;
};

}  // namespace splatscan
