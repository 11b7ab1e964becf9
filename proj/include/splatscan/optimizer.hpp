// Gradient-descent fitting of a Gaussian scene to posed ground-truth images.
// Gradients are analytic reverse-mode through the compositing and projection
// chain; the optimizer is Adam with per-parameter-group step sizes.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatscan/image.hpp"
#include "splatscan/renderer.hpp"
#include "splatscan/types.hpp"

namespace splatscan {

// Flat parameter layout, 14 doubles per Gaussian:
//   [0..2] mean, [3..5] scales, [6..9] rotation quat (w,x,y,z),
//   [10..12] color, [13] opacity.
inline constexpr int kParamsPerGaussian = 14;

std::vector<double> pack_parameters(const Scene& scene);
void unpack_parameters(const std::vector<double>& params, Scene& scene);

struct DensifyConfig {
    bool enabled = false;
    int interval = 500;            // iterations between densify/prune passes
    double grad_threshold = 5e-4;  // mean positional-gradient norm for cloning
    double prune_opacity = 0.02;
    int max_gaussians = 20000;
};

struct OptimConfig {
    double lr_mean = 2e-3;
    double lr_scales = 2e-3;
    double lr_rotation = 2e-3;
    double lr_color = 2.5e-2;
    double lr_opacity = 2.5e-2;
    int total_iters = 30000;
    double lambda_ssim = 0.2;  // loss = (1-l)*L1 + l*(1-SSIM)
    DensifyConfig densify;

    // Constraint projection applied after every step.
    double min_scale = 1e-3;
    double opacity_eps = 1e-3;

    // Adam internals.
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
};

struct TrainView {
    Camera camera;
    Image gt;  // H x W x 3
};

struct TrainState {
    Scene scene;
    int iteration = 0;
    std::vector<TrainView> active_views;  // append-only
    uint64_t rng_seed = 0;

    // Optimizer state carried across fit() calls.
    std::vector<double> adam_m, adam_v;
    int adam_steps = 0;
    double initial_loss = -1.0;
    int divergence_streak = 0;
    std::vector<double> pos_grad_accum;  // densify statistics
    std::vector<int> pos_grad_count;
};

// (1 - lambda_ssim) * mean-L1 + lambda_ssim * (1 - mean SSIM). Throws on
// dimension mismatch.
double photometric_loss(const Image& rendered, const Image& gt, double lambda_ssim);

// dLoss/dRendered for the loss above.
Image photometric_loss_backward(const Image& rendered, const Image& gt, double lambda_ssim);

// Fused loss value + gradient (shares the SSIM window pass).
double photometric_loss_with_backward(const Image& rendered, const Image& gt, double lambda_ssim,
                                      Image& grad_out);

// Accumulates dLoss/dparams for an already-rendered view. `grad_color` is the
// loss derivative at the rendered color image. grad_params must be sized
// kParamsPerGaussian * n_gaussians; contributions are added in place.
void render_backward(const Scene& scene, const Camera& cam, const SplatBatch& batch,
                     const RenderConfig& cfg, const Image& grad_color,
                     std::vector<double>& grad_params);

// Mean loss gradient over the given views. Throws std::runtime_error naming
// the parameter slot if any gradient is non-finite.
std::vector<double> loss_gradients(const TrainState& state, const std::vector<int>& view_indices,
                                   const OptimConfig& cfg, const RenderConfig& rcfg,
                                   double* loss_out = nullptr);

// Runs Adam steps (one seeded random active view per step) until
// state.iteration == until_iter, applying constraint projection after every
// step and densify/prune at the configured interval. Aborts with a diagnostic
// when the loss exceeds 10x its initial value for 200 consecutive steps.
void fit(TrainState& state, const OptimConfig& cfg, const RenderConfig& rcfg, int until_iter);

// Uniformly scattered isotropic Gaussians: scale = diameter / n^(1/3) / 4,
// gray color, opacity 0.1.
Scene init_scene(const Vec3& bounds, int n_init, uint64_t seed);

// Checkpoint = scene JSON plus a sidecar with run metadata.
void save_checkpoint(const Scene& scene, int iteration, uint64_t seed,
                     const std::string& config_hash, const std::string& scene_path,
                     const std::string& sidecar_path);

}  // namespace splatscan
