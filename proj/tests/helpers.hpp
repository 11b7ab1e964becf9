// Shared test utilities: independent reference implementations (compositing,
// SSIM windowed statistics), random scene/camera factories and temp-dir
// scaffolding. Reference code here must stay independent of the library
// implementation paths it cross-checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "splatscan/renderer.hpp"
#include "splatscan/rng.hpp"
#include "splatscan/scene_gen.hpp"
#include "splatscan/types.hpp"

namespace test_helpers {

using namespace splatscan;

// Naive per-pixel compositing reference: every projected splat is evaluated at
// every pixel (no binning, no transmittance early-out). Per-splat opacity and
// the 3-sigma support rule are re-derived from the raw splat fields.
inline RenderResult reference_render(const Scene& scene, const Camera& cam,
                                     const RenderConfig& cfg) {
    struct RefSplat {
        Vec2 mean;
        double ia, ib, ic;  // inverse covariance [ia ib; ib ic]
        double sx3, sy3;
        double depth, opacity;
        Vec3 color;
        int index;
    };
    std::vector<RefSplat> splats;
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        auto s = project_gaussian(scene.gaussians[i], cam, cfg, int(i));
        if (!s) continue;
        RefSplat r;
        r.mean = s->mean2d;
        double a = s->cov2d(0, 0), b = s->cov2d(0, 1), c = s->cov2d(1, 1);
        double det = a * c - b * b;
        r.ia = c / det;
        r.ib = -b / det;
        r.ic = a / det;
        r.sx3 = 3.0 * std::sqrt(a);
        r.sy3 = 3.0 * std::sqrt(c);
        r.depth = s->depth;
        r.opacity = s->base_opacity;
        r.color = s->color;
        r.index = int(i);
        splats.push_back(r);
    }
    std::sort(splats.begin(), splats.end(), [](const RefSplat& p, const RefSplat& q) {
        if (p.depth != q.depth) return p.depth < q.depth;
        return p.index < q.index;
    });

    RenderResult out;
    out.color = Image(cam.width, cam.height, 3);
    out.depth = Image(cam.width, cam.height, 1);
    out.alpha = Image(cam.width, cam.height, 1);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            double px = x + 0.5, py = y + 0.5;
            double T = 1.0;
            Vec3 color = Vec3::Zero();
            double depth = 0.0;
            for (const RefSplat& s : splats) {
                double dx = px - s.mean[0], dy = py - s.mean[1];
                if (std::abs(dx) > s.sx3 || std::abs(dy) > s.sy3) continue;
                double q = s.ia * dx * dx + 2.0 * s.ib * dx * dy + s.ic * dy * dy;
                double alpha = std::min(s.opacity * std::exp(-0.5 * q), cfg.alpha_max);
                color += T * alpha * s.color;
                depth += T * alpha * s.depth;
                T *= 1.0 - alpha;
            }
            color += T * scene.background_color;
            for (int c = 0; c < 3; ++c) out.color.at(x, y, c) = color[c];
            out.depth.at(x, y, 0) = depth;
            out.alpha.at(x, y, 0) = 1.0 - T;
        }
    }
    return out;
}

inline Scene random_scene(Rng& rng, int n, double extent = 0.6, double opacity_lo = 0.2,
                          double opacity_hi = 0.9) {
    Scene scene;
    scene.background_color = Vec3(rng.uniform(), rng.uniform(), rng.uniform()) * 0.3;
    for (int i = 0; i < n; ++i) {
        Gaussian3D g;
        g.mean = Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                      rng.uniform(-extent, extent));
        g.scales = Vec3(rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3));
        double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
        double s1 = std::sqrt(1.0 - u1), s2 = std::sqrt(u1);
        g.rotation = Quat(s2 * std::cos(2 * M_PI * u3), s1 * std::sin(2 * M_PI * u2),
                          s1 * std::cos(2 * M_PI * u2), s2 * std::sin(2 * M_PI * u3));
        g.rotation.normalize();
        g.color = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
        g.opacity = rng.uniform(opacity_lo, opacity_hi);
        scene.gaussians.push_back(g);
    }
    return scene;
}

inline Camera test_camera(int width = 16, int height = 16, double dist = 2.5,
                          double azimuth = 0.3, double elevation = 0.4) {
    Vec3 pos(dist * std::cos(azimuth) * std::cos(elevation),
             dist * std::sin(azimuth) * std::cos(elevation), dist * std::sin(elevation));
    double fx = width * 1.1;
    return look_at(pos, Vec3::Zero(), fx, fx, width / 2.0, height / 2.0, width, height);
}

inline Image random_image(Rng& rng, int w, int h, int c) {
    Image img(w, h, c);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

// Unique writable scratch directory under the build tree.
inline std::string temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("splatscan_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace test_helpers
