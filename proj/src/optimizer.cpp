#include "splatscan/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "splatscan/rng.hpp"

namespace splatscan {

std::vector<double> pack_parameters(const Scene& scene) {
    std::vector<double> p(scene.gaussians.size() * kParamsPerGaussian);
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        const Gaussian3D& g = scene.gaussians[i];
        double* q = p.data() + i * kParamsPerGaussian;
        for (int k = 0; k < 3; ++k) q[k] = g.mean[k];
        for (int k = 0; k < 3; ++k) q[3 + k] = g.scales[k];
        q[6] = g.rotation.w();
        q[7] = g.rotation.x();
        q[8] = g.rotation.y();
        q[9] = g.rotation.z();
        for (int k = 0; k < 3; ++k) q[10 + k] = g.color[k];
        q[13] = g.opacity;
    }
    return p;
}

void unpack_parameters(const std::vector<double>& params, Scene& scene) {
    if (params.size() != scene.gaussians.size() * kParamsPerGaussian)
        throw std::invalid_argument("unpack_parameters: size mismatch");
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        Gaussian3D& g = scene.gaussians[i];
        const double* q = params.data() + i * kParamsPerGaussian;
        g.mean = Vec3(q[0], q[1], q[2]);
        g.scales = Vec3(q[3], q[4], q[5]);
        g.rotation = Quat(q[6], q[7], q[8], q[9]);
        g.color = Vec3(q[10], q[11], q[12]);
        g.opacity = q[13];
    }
}

namespace {

const char* slot_name(int slot) {
    static const char* names[kParamsPerGaussian] = {
        "mean.x", "mean.y", "mean.z", "scales.x", "scales.y", "scales.z",
        "quat.w", "quat.x", "quat.y", "quat.z", "color.r", "color.g", "color.b",
        "opacity"};
    return names[slot];
}

double group_lr(int slot, const OptimConfig& cfg) {
    if (slot < 3) return cfg.lr_mean;
    if (slot < 6) return cfg.lr_scales;
    if (slot < 10) return cfg.lr_rotation;
    if (slot < 13) return cfg.lr_color;
    return cfg.lr_opacity;
}

void project_constraints(Scene& scene, const OptimConfig& cfg) {
    for (auto& g : scene.gaussians) {
        for (int k = 0; k < 3; ++k) {
            g.scales[k] = std::max(g.scales[k], cfg.min_scale);
            g.color[k] = std::clamp(g.color[k], 0.0, 1.0);
        }
        g.opacity = std::clamp(g.opacity, cfg.opacity_eps, 1.0 - cfg.opacity_eps);
        double n = g.rotation.norm();
        if (n < 1e-12)
            g.rotation = Quat::Identity();
        else
            g.rotation.coeffs() /= n;
    }
}

void densify_and_prune(TrainState& state, const OptimConfig& cfg) {
    const DensifyConfig& dc = cfg.densify;
    Scene& scene = state.scene;
    size_t n = scene.gaussians.size();

    std::vector<Gaussian3D> kept;
    std::vector<double> kept_m, kept_v;
    kept.reserve(n);
    Rng jitter = substream(state.rng_seed ^ uint64_t(state.iteration), "densify");

    std::vector<Gaussian3D> clones;
    for (size_t i = 0; i < n; ++i) {
        const Gaussian3D& g = scene.gaussians[i];
        if (g.opacity < dc.prune_opacity) continue;  // prune
        size_t base = i * kParamsPerGaussian;
        kept.push_back(g);
        for (int k = 0; k < kParamsPerGaussian; ++k) {
            kept_m.push_back(state.adam_m[base + k]);
            kept_v.push_back(state.adam_v[base + k]);
        }
        double avg = state.pos_grad_count[i] > 0
                         ? state.pos_grad_accum[i] / state.pos_grad_count[i]
                         : 0.0;
        if (avg > dc.grad_threshold &&
            kept.size() + clones.size() < size_t(dc.max_gaussians)) {
            Gaussian3D c = g;
            double r = 0.5 * g.scales.minCoeff();
            c.mean += r * Vec3(jitter.normal(), jitter.normal(), jitter.normal());
            c.scales *= 0.8;
            clones.push_back(c);
        }
    }
    for (const auto& c : clones) {
        kept.push_back(c);
        for (int k = 0; k < kParamsPerGaussian; ++k) {
            kept_m.push_back(0.0);
            kept_v.push_back(0.0);
        }
    }

    scene.gaussians = std::move(kept);
    state.adam_m = std::move(kept_m);
    state.adam_v = std::move(kept_v);
    state.pos_grad_accum.assign(scene.gaussians.size(), 0.0);
    state.pos_grad_count.assign(scene.gaussians.size(), 0);
}

}  // namespace

std::vector<double> loss_gradients(const TrainState& state, const std::vector<int>& view_indices,
                                   const OptimConfig& cfg, const RenderConfig& rcfg,
                                   double* loss_out) {
    if (view_indices.empty()) throw std::invalid_argument("loss_gradients: empty view batch");
    std::vector<double> grads(state.scene.gaussians.size() * kParamsPerGaussian, 0.0);
    double loss_acc = 0.0;
    for (int vi : view_indices) {
        const TrainView& view = state.active_views.at(size_t(vi));
        SplatBatch batch = bin_splats(state.scene, view.camera, rcfg);
        RenderResult rr = composite(batch, state.scene.background_color, rcfg);
        Image grad_color;
        loss_acc += photometric_loss_with_backward(rr.color, view.gt, cfg.lambda_ssim, grad_color);
        render_backward(state.scene, view.camera, batch, rcfg, grad_color, grads);
    }
    double inv = 1.0 / double(view_indices.size());
    for (auto& g : grads) g *= inv;
    for (size_t k = 0; k < grads.size(); ++k) {
        if (!std::isfinite(grads[k]))
            throw std::runtime_error(
                "loss_gradients: non-finite gradient for Gaussian " +
                std::to_string(k / kParamsPerGaussian) + " parameter " +
                slot_name(int(k % kParamsPerGaussian)));
    }
    if (loss_out) *loss_out = loss_acc * inv;
    return grads;
}

void fit(TrainState& state, const OptimConfig& cfg, const RenderConfig& rcfg, int until_iter) {
    if (state.active_views.empty()) throw std::invalid_argument("fit: no active views");
    if (until_iter <= state.iteration) return;

    const size_t n_params = state.scene.gaussians.size() * kParamsPerGaussian;
    if (state.adam_m.size() != n_params) {
        state.adam_m.assign(n_params, 0.0);
        state.adam_v.assign(n_params, 0.0);
    }
    if (state.pos_grad_accum.size() != state.scene.gaussians.size()) {
        state.pos_grad_accum.assign(state.scene.gaussians.size(), 0.0);
        state.pos_grad_count.assign(state.scene.gaussians.size(), 0);
    }

    const uint64_t opt_seed = substream_seed(state.rng_seed, "optimizer");

    while (state.iteration < until_iter) {
        // Stateless per-iteration view choice keeps runs reproducible across
        // arbitrary fit() call boundaries.
        Rng pick(opt_seed + uint64_t(state.iteration));
        int vi = int(pick.uniform_int(state.active_views.size()));

        double loss = 0.0;
        std::vector<double> grads = loss_gradients(state, {vi}, cfg, rcfg, &loss);

        if (state.initial_loss < 0.0) state.initial_loss = std::max(loss, 1e-12);
        if (loss > 10.0 * state.initial_loss) {
            if (++state.divergence_streak >= 200)
                throw std::runtime_error(
                    "fit: diverged at iteration " + std::to_string(state.iteration) +
                    " (loss " + std::to_string(loss) + " > 10x initial " +
                    std::to_string(state.initial_loss) + " for 200 consecutive steps)");
        } else {
            state.divergence_streak = 0;
        }

        std::vector<double> params = pack_parameters(state.scene);
        ++state.adam_steps;
        double bc1 = 1.0 - std::pow(cfg.beta1, state.adam_steps);
        double bc2 = 1.0 - std::pow(cfg.beta2, state.adam_steps);
        for (size_t k = 0; k < params.size(); ++k) {
            double g = grads[k];
            state.adam_m[k] = cfg.beta1 * state.adam_m[k] + (1.0 - cfg.beta1) * g;
            state.adam_v[k] = cfg.beta2 * state.adam_v[k] + (1.0 - cfg.beta2) * g * g;
            double mh = state.adam_m[k] / bc1;
            double vh = state.adam_v[k] / bc2;
            params[k] -= group_lr(int(k % kParamsPerGaussian), cfg) * mh /
                         (std::sqrt(vh) + cfg.adam_eps);
        }
        unpack_parameters(params, state.scene);
        project_constraints(state.scene, cfg);

        if (cfg.densify.enabled) {
            for (size_t i = 0; i < state.scene.gaussians.size(); ++i) {
                const double* gp = grads.data() + i * kParamsPerGaussian;
                state.pos_grad_accum[i] += Vec3(gp[0], gp[1], gp[2]).norm();
                state.pos_grad_count[i] += 1;
            }
        }

        ++state.iteration;

        if (cfg.densify.enabled && state.iteration % cfg.densify.interval == 0 &&
            state.iteration < until_iter)
            densify_and_prune(state, cfg);
    }
}

Scene init_scene(const Vec3& bounds, int n_init, uint64_t seed) {
    if (n_init < 1) throw std::invalid_argument("init_scene: n_init >= 1");
    Rng rng = substream(seed, "init");
    double diameter = 2.0 * bounds.norm();
    double scale = diameter / std::cbrt(double(n_init)) / 4.0;
    Scene scene;
    scene.gaussians.reserve(size_t(n_init));
    for (int i = 0; i < n_init; ++i) {
        Gaussian3D g;
        g.mean = Vec3(rng.uniform(-bounds[0], bounds[0]), rng.uniform(-bounds[1], bounds[1]),
                      rng.uniform(-bounds[2], bounds[2]));
        g.scales = Vec3::Constant(scale);
        g.rotation = Quat::Identity();
        g.color = Vec3::Constant(0.5);
        g.opacity = 0.1;
        scene.gaussians.push_back(g);
    }
    return scene;
}

void save_checkpoint(const Scene& scene, int iteration, uint64_t seed,
                     const std::string& config_hash, const std::string& scene_path,
                     const std::string& sidecar_path) {
    save_scene(scene, scene_path);
    nlohmann::json j{{"iteration", iteration}, {"seed", seed}, {"config_hash", config_hash}};
    std::ofstream os(sidecar_path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + sidecar_path);
    os << j.dump(2);
}

}  // namespace splatscan
