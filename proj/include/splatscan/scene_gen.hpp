// Procedural ground-truth scenes and candidate viewpoint/path sampling.
// Ground truth is itself a Gaussian scene rendered by the same renderer, which
// gives an exact image oracle without external assets.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatscan/types.hpp"

namespace splatscan {

enum class SceneLayout { BlobCluster, TexturedBox, OccludedCavity };

// Throws std::invalid_argument for unknown names.
SceneLayout parse_layout(const std::string& name);
std::string layout_name(SceneLayout layout);

struct SceneSpec {
    uint64_t seed = 0;
    int n_gaussians = 1;
    SceneLayout layout = SceneLayout::BlobCluster;
    Vec3 bounds = Vec3::Ones();  // half-extents of the content box around the origin
};

// Generation result. cavity_indices tags the Gaussians placed inside the
// concave region of the occluded-cavity layout (empty for other layouts);
// tests use them to verify the occlusion property.
struct SyntheticScene {
    Scene scene;
    std::vector<int> cavity_indices;
};

SyntheticScene generate_synthetic_scene(const SceneSpec& spec);

struct CameraIntrinsics {
    double fx = 64.0, fy = 64.0;
    double cx = 32.0, cy = 32.0;
    int width = 64, height = 64;

    static CameraIntrinsics from_fov(int width, int height, double fov_x_deg);
};

// Fibonacci sphere lattice with a seeded random longitude offset. All cameras
// sit at `radius` from `center` and look at it (up +z, +y fallback at poles).
// hemisphere=true restricts samples to z >= 0 around the center.
ViewpointSet sample_sphere_viewpoints(int n, double radius, const Vec3& center,
                                      uint64_t seed, const CameraIntrinsics& intr,
                                      bool hemisphere = false);

// k >= 2 poses from a to b: positions lerped, orientations slerped. Endpoints
// reproduce a and b exactly. Throws on mismatched intrinsics.
std::vector<Camera> interpolate_path(const Camera& a, const Camera& b, int k);

}  // namespace splatscan
