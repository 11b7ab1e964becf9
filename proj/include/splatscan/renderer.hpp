// Forward splatting renderer: projects 3D Gaussians to 2D splats (first-order
// EWA) and alpha-composites color and depth front to back.
#pragma once

#include <optional>
#include <vector>

#include "splatscan/image.hpp"
#include "splatscan/types.hpp"

namespace splatscan {

struct RenderConfig {
    double near_plane = 0.01;   // camera-space z culling plane
    double eps_cov = 0.3;       // px^2 added to the 2D covariance diagonal
    double alpha_max = 0.99;    // per-pixel opacity clamp
    double t_min = 1e-4;        // transmittance early-out threshold
    bool normalize_depth_by_alpha = false;  // divide composited depth by accum alpha
};

// A projected Gaussian. A splat contributes to a pixel only when the pixel
// center lies inside its 3-sigma axis-aligned bounding box; outside, its
// per-pixel opacity is defined to be zero.
struct Splat2D {
    Vec2 mean2d;          // pixel coordinates
    Mat2 cov2d;           // regularized, positive definite
    Mat2 cov_inv;
    double depth = 0.0;   // camera-space z of the 3D mean
    Vec3 color = Vec3::Zero();
    double base_opacity = 0.0;
    double bbox_half_x = 0.0, bbox_half_y = 0.0;  // 3-sigma half extents
    int gaussian_index = -1;
};

struct RenderResult {
    Image color;  // H x W x 3
    Image depth;  // H x W x 1, opacity-composited camera-space z
    Image alpha;  // H x W x 1, accumulated opacity
};

// Per-pixel opacity of a splat evaluated at pixel center (px, py); applies the
// 3-sigma support rule and the alpha_max clamp.
double splat_alpha(const Splat2D& s, double px, double py, const RenderConfig& cfg);

// Returns nullopt when the Gaussian is culled (behind the near plane, or its
// 3-sigma footprint misses the image).
std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const Camera& cam,
                                        const RenderConfig& cfg, int index = -1);

// Projected splats binned per pixel, in canonical compositing order
// (ascending depth, ties by original index). Shared by the forward render and
// the gradient pass so both see identical contributor sets.
struct SplatBatch {
    std::vector<Splat2D> splats;       // depth-sorted
    std::vector<uint32_t> offsets;     // size W*H+1, prefix offsets into entries
    std::vector<uint32_t> entries;     // splat indices per pixel, depth-ordered
    int width = 0, height = 0;
};

// Throws std::runtime_error naming the Gaussian index if any parameter is
// non-finite.
SplatBatch bin_splats(const Scene& scene, const Camera& cam, const RenderConfig& cfg);

RenderResult composite(const SplatBatch& batch, const Vec3& background,
                       const RenderConfig& cfg);

RenderResult render(const Scene& scene, const Camera& cam, const RenderConfig& cfg = {});

// Transmittance in front of a world-space point seen from `cam`: the product
// of (1 - alpha) over all splats strictly nearer than the point at its
// projected pixel. 1 = unoccluded, 0 = fully hidden or out of view. Used to
// verify occlusion properties of generated scenes.
double transmittance_at(const Scene& scene, const Camera& cam, const Vec3& point,
                        const RenderConfig& cfg = {});

}  // namespace splatscan
