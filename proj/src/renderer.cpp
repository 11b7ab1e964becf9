#include "splatscan/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace splatscan {

namespace {

void check_finite(const Gaussian3D& g, int index) {
    bool ok = g.mean.allFinite() && g.scales.allFinite() && g.color.allFinite() &&
              std::isfinite(g.opacity) && std::isfinite(g.rotation.w()) &&
              std::isfinite(g.rotation.x()) && std::isfinite(g.rotation.y()) &&
              std::isfinite(g.rotation.z());
    if (!ok)
        throw std::runtime_error("render: non-finite parameter in Gaussian " +
                                 std::to_string(index));
}

}  // namespace

double splat_alpha(const Splat2D& s, double px, double py, const RenderConfig& cfg) {
    double dx = px - s.mean2d[0];
    double dy = py - s.mean2d[1];
    if (std::abs(dx) > s.bbox_half_x || std::abs(dy) > s.bbox_half_y) return 0.0;
    double q = s.cov_inv(0, 0) * dx * dx + 2.0 * s.cov_inv(0, 1) * dx * dy +
               s.cov_inv(1, 1) * dy * dy;
    double a = s.base_opacity * std::exp(-0.5 * q);
    return std::min(a, cfg.alpha_max);
}

std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const Camera& cam,
                                        const RenderConfig& cfg, int index) {
    Vec3 p_cam = cam.world_to_camera(g.mean);
    double z = p_cam[2];
    if (z <= cfg.near_plane) return std::nullopt;

    double x = p_cam[0], y = p_cam[1];
    Vec2 mean2d(cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy);

    // First-order EWA: cov2d = J W Sigma W^T J^T with J the Jacobian of the
    // perspective projection at the transformed mean.
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx / z, 0.0, -cam.fx * x / (z * z),
         0.0, cam.fy / z, -cam.fy * y / (z * z);
    Eigen::Matrix<double, 2, 3> A = J * cam.rotation;
    Mat2 cov2d = A * g.covariance() * A.transpose();
    cov2d(0, 0) += cfg.eps_cov;
    cov2d(1, 1) += cfg.eps_cov;

    Splat2D s;
    s.mean2d = mean2d;
    s.cov2d = cov2d;
    double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
    s.cov_inv << cov2d(1, 1) / det, -cov2d(0, 1) / det,
                 -cov2d(1, 0) / det, cov2d(0, 0) / det;
    s.depth = z;
    s.color = g.color;
    s.base_opacity = g.opacity;
    s.bbox_half_x = 3.0 * std::sqrt(cov2d(0, 0));
    s.bbox_half_y = 3.0 * std::sqrt(cov2d(1, 1));
    s.gaussian_index = index;

    // Cull when no pixel center can fall inside the 3-sigma box.
    if (mean2d[0] + s.bbox_half_x < 0.5 || mean2d[0] - s.bbox_half_x > cam.width - 0.5 ||
        mean2d[1] + s.bbox_half_y < 0.5 || mean2d[1] - s.bbox_half_y > cam.height - 0.5)
        return std::nullopt;
    return s;
}

SplatBatch bin_splats(const Scene& scene, const Camera& cam, const RenderConfig& cfg) {
    SplatBatch batch;
    batch.width = cam.width;
    batch.height = cam.height;

    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        check_finite(scene.gaussians[i], int(i));
        if (auto s = project_gaussian(scene.gaussians[i], cam, cfg, int(i)))
            batch.splats.push_back(*s);
    }

    // Canonical compositing order: ascending depth, ties by original index.
    std::sort(batch.splats.begin(), batch.splats.end(), [](const Splat2D& a, const Splat2D& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.gaussian_index < b.gaussian_index;
    });

    const size_t n_pixels = size_t(cam.width) * cam.height;
    std::vector<uint32_t> counts(n_pixels, 0);

    auto pixel_range = [&](const Splat2D& s, int& x0, int& x1, int& y0, int& y1) {
        x0 = std::max(0, int(std::ceil(s.mean2d[0] - s.bbox_half_x - 0.5)));
        x1 = std::min(cam.width - 1, int(std::floor(s.mean2d[0] + s.bbox_half_x - 0.5)));
        y0 = std::max(0, int(std::ceil(s.mean2d[1] - s.bbox_half_y - 0.5)));
        y1 = std::min(cam.height - 1, int(std::floor(s.mean2d[1] + s.bbox_half_y - 0.5)));
    };

    for (const Splat2D& s : batch.splats) {
        int x0, x1, y0, y1;
        pixel_range(s, x0, x1, y0, y1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) ++counts[size_t(y) * cam.width + x];
    }

    batch.offsets.assign(n_pixels + 1, 0);
    for (size_t p = 0; p < n_pixels; ++p) batch.offsets[p + 1] = batch.offsets[p] + counts[p];
    batch.entries.resize(batch.offsets.back());

    std::vector<uint32_t> cursor(batch.offsets.begin(), batch.offsets.end() - 1);
    for (uint32_t si = 0; si < batch.splats.size(); ++si) {
        const Splat2D& s = batch.splats[si];
        int x0, x1, y0, y1;
        pixel_range(s, x0, x1, y0, y1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) batch.entries[cursor[size_t(y) * cam.width + x]++] = si;
    }
    return batch;
}

RenderResult composite(const SplatBatch& batch, const Vec3& background,
                       const RenderConfig& cfg) {
    RenderResult out;
    out.color = Image(batch.width, batch.height, 3);
    out.depth = Image(batch.width, batch.height, 1);
    out.alpha = Image(batch.width, batch.height, 1);

    for (int y = 0; y < batch.height; ++y) {
        for (int x = 0; x < batch.width; ++x) {
            size_t p = size_t(y) * batch.width + x;
            double px = x + 0.5, py = y + 0.5;
            double T = 1.0;
            Vec3 color = Vec3::Zero();
            double depth = 0.0;
            for (uint32_t e = batch.offsets[p]; e < batch.offsets[p + 1]; ++e) {
                const Splat2D& s = batch.splats[batch.entries[e]];
                double a = splat_alpha(s, px, py, cfg);
                if (a <= 0.0) continue;
                color += T * a * s.color;
                depth += T * a * s.depth;
                T *= 1.0 - a;
                if (T < cfg.t_min) break;
            }
            color += T * background;
            double alpha = 1.0 - T;
            if (cfg.normalize_depth_by_alpha && alpha > 0.0) depth /= alpha;
            for (int c = 0; c < 3; ++c) out.color.at(x, y, c) = color[c];
            out.depth.at(x, y, 0) = depth;
            out.alpha.at(x, y, 0) = alpha;
        }
    }
    return out;
}

RenderResult render(const Scene& scene, const Camera& cam, const RenderConfig& cfg) {
    return composite(bin_splats(scene, cam, cfg), scene.background_color, cfg);
}

double transmittance_at(const Scene& scene, const Camera& cam, const Vec3& point,
                        const RenderConfig& cfg) {
    Vec3 p_cam = cam.world_to_camera(point);
    double z = p_cam[2];
    if (z <= cfg.near_plane) return 0.0;
    double u = cam.fx * p_cam[0] / z + cam.cx;
    double v = cam.fy * p_cam[1] / z + cam.cy;
    if (u < 0.0 || u >= cam.width || v < 0.0 || v >= cam.height) return 0.0;

    double T = 1.0;
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        auto s = project_gaussian(scene.gaussians[i], cam, cfg, int(i));
        if (!s || s->depth >= z - 1e-9) continue;
        T *= 1.0 - splat_alpha(*s, u, v, cfg);
    }
    return T;
}

}  // namespace splatscan
