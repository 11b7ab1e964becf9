#include "splatscan/scene_gen.hpp"

#include <cmath>
#include <stdexcept>

#include "splatscan/rng.hpp"

namespace splatscan {

SceneLayout parse_layout(const std::string& name) {
    if (name == "blob-cluster") return SceneLayout::BlobCluster;
    if (name == "textured-box") return SceneLayout::TexturedBox;
    if (name == "occluded-cavity") return SceneLayout::OccludedCavity;
    throw std::invalid_argument("unknown scene layout: '" + name +
                                "' (expected blob-cluster, textured-box or occluded-cavity)");
}

std::string layout_name(SceneLayout layout) {
    switch (layout) {
        case SceneLayout::BlobCluster: return "blob-cluster";
        case SceneLayout::TexturedBox: return "textured-box";
        case SceneLayout::OccludedCavity: return "occluded-cavity";
    }
    return "?";
}

namespace {

Quat random_rotation(Rng& rng) {
    // Uniform over SO(3) (Shoemake); exact distribution is not important,
    // determinism is.
    double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
    double s1 = std::sqrt(1.0 - u1), s2 = std::sqrt(u1);
    Quat q(s2 * std::cos(2 * M_PI * u3), s1 * std::sin(2 * M_PI * u2),
           s1 * std::cos(2 * M_PI * u2), s2 * std::sin(2 * M_PI * u3));
    q.normalize();
    return q;
}

Vec3 random_unit(Rng& rng) {
    double z = rng.uniform(-1.0, 1.0);
    double phi = rng.uniform(0.0, 2.0 * M_PI);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

Vec3 clamp_to_bounds(const Vec3& p, const Vec3& bounds) {
    return p.cwiseMax(-bounds).cwiseMin(bounds);
}

void generate_blob_cluster(const SceneSpec& spec, Rng& rng, Scene& scene) {
    int n_clusters = std::max(1, std::min(5, spec.n_gaussians / 8));
    std::vector<Vec3> centers;
    for (int c = 0; c < n_clusters; ++c)
        centers.push_back(Vec3(rng.uniform(-0.5, 0.5) * spec.bounds[0],
                               rng.uniform(-0.5, 0.5) * spec.bounds[1],
                               rng.uniform(-0.5, 0.5) * spec.bounds[2]));
    double spread = 0.3 * spec.bounds.minCoeff();
    double base_scale = 0.6 * spec.bounds.minCoeff() / std::cbrt(double(spec.n_gaussians));
    for (int i = 0; i < spec.n_gaussians; ++i) {
        const Vec3& c = centers[size_t(i) % centers.size()];
        Gaussian3D g;
        g.mean = clamp_to_bounds(
            c + spread * Vec3(rng.normal(), rng.normal(), rng.normal()), spec.bounds);
        g.scales = Vec3(base_scale * rng.uniform(0.5, 1.5), base_scale * rng.uniform(0.5, 1.5),
                        base_scale * rng.uniform(0.5, 1.5));
        g.rotation = random_rotation(rng);
        g.color = Vec3(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
        g.opacity = rng.uniform(0.4, 0.9);
        scene.gaussians.push_back(g);
    }
}

void generate_textured_box(const SceneSpec& spec, Rng& rng, Scene& scene) {
    // Flattened Gaussians tiled over the six faces of a box, colored by a
    // smooth position-dependent pattern so views are texture-rich.
    Vec3 half = 0.7 * spec.bounds;
    double face_scale = 1.4 * half.maxCoeff() / std::sqrt(std::max(1.0, spec.n_gaussians / 6.0));
    for (int i = 0; i < spec.n_gaussians; ++i) {
        int face = int(rng.uniform_int(6));
        int axis = face / 2;
        double sign = (face % 2 == 0) ? 1.0 : -1.0;
        Vec3 p;
        for (int a = 0; a < 3; ++a)
            p[a] = (a == axis) ? sign * half[a] : rng.uniform(-half[a], half[a]);
        Gaussian3D g;
        g.mean = p;
        Vec3 s = Vec3::Constant(face_scale * rng.uniform(0.6, 1.2));
        s[axis] *= 0.15;  // thin along the face normal
        g.scales = s;
        g.rotation = Quat::Identity();
        double u = 0.5 + 0.5 * std::sin(7.0 * p[0] + 3.0 * p[1]);
        double v = 0.5 + 0.5 * std::sin(5.0 * p[1] + 4.0 * p[2]);
        g.color = Vec3(0.15 + 0.7 * u, 0.15 + 0.7 * v, 0.15 + 0.7 * (1.0 - u));
        g.opacity = rng.uniform(0.6, 0.9);
        scene.gaussians.push_back(g);
    }
}

void generate_occluded_cavity(const SceneSpec& spec, Rng& rng, SyntheticScene& out) {
    // A near-closed spherical shell with one circular opening and a cluster of
    // Gaussians deep inside, visible only through the opening. The shell
    // carries high-frequency color texture (hard to fit exactly at limited
    // model capacity) while the interior is smooth and saturated, so the deep
    // region rewards dedicated views.
    Scene& scene = out.scene;
    double r_shell = 0.75 * spec.bounds.minCoeff();
    Vec3 open_dir = random_unit(rng);
    const double open_half_angle = 0.55;  // rad; cap that stays open
    double cos_open = std::cos(open_half_angle);

    int n_interior = std::max(1, spec.n_gaussians / 3);
    int n_shell = spec.n_gaussians - n_interior;

    double shell_area = 4.0 * M_PI * r_shell * r_shell;
    double sigma_t = 0.8 * std::sqrt(shell_area / std::max(1, n_shell));

    int placed = 0;
    while (placed < n_shell) {
        Vec3 dir = random_unit(rng);
        if (dir.dot(open_dir) > cos_open) continue;  // leave the opening clear
        Gaussian3D g;
        g.mean = dir * r_shell;
        // Orient the Gaussian with its third axis along the surface normal.
        Vec3 tangent = dir.cross(std::abs(dir[2]) < 0.9 ? Vec3(0, 0, 1) : Vec3(0, 1, 0)).normalized();
        Vec3 bitangent = dir.cross(tangent);
        Mat3 frame;
        frame.col(0) = tangent;
        frame.col(1) = bitangent;
        frame.col(2) = dir;
        g.rotation = Quat(frame).normalized();
        g.scales = Vec3(sigma_t * rng.uniform(0.7, 1.3), sigma_t * rng.uniform(0.7, 1.3),
                        0.04 * r_shell);
        // Per-Gaussian saturated colors: neighboring splats alternate strongly.
        g.color = Vec3(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95));
        g.opacity = rng.uniform(0.85, 0.95);
        scene.gaussians.push_back(g);
        ++placed;
    }

    Vec3 interior_center = -0.4 * r_shell * open_dir;  // deep side, away from the opening
    double interior_spread = 0.42 * r_shell;
    double interior_scale = 0.7 * r_shell / std::cbrt(double(std::max(1, n_interior)));
    for (int i = 0; i < n_interior; ++i) {
        Gaussian3D g;
        Vec3 offset = interior_spread * Vec3(rng.normal(), rng.normal(), rng.normal());
        Vec3 p = interior_center + offset;
        if (p.norm() > 0.78 * r_shell) p *= 0.78 * r_shell / p.norm();  // keep inside the shell
        g.mean = p;
        g.scales = Vec3(interior_scale * rng.uniform(0.7, 1.2),
                        interior_scale * rng.uniform(0.7, 1.2),
                        interior_scale * rng.uniform(0.7, 1.2));
        g.rotation = random_rotation(rng);
        g.color = Vec3(rng.uniform(0.6, 1.0), rng.uniform(0.0, 0.4), rng.uniform(0.4, 1.0));
        g.opacity = rng.uniform(0.7, 0.9);
        out.cavity_indices.push_back(int(scene.gaussians.size()));
        scene.gaussians.push_back(g);
    }
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SceneSpec& spec) {
    if (spec.n_gaussians < 1) throw std::invalid_argument("generate_synthetic_scene: n_gaussians >= 1");
    if (!(spec.bounds.minCoeff() > 0.0))
        throw std::invalid_argument("generate_synthetic_scene: bounds must be positive");

    Rng rng = substream(spec.seed, "scene");
    SyntheticScene out;
    out.scene.background_color = Vec3(0.0, 0.0, 0.0);
    switch (spec.layout) {
        case SceneLayout::BlobCluster: generate_blob_cluster(spec, rng, out.scene); break;
        case SceneLayout::TexturedBox: generate_textured_box(spec, rng, out.scene); break;
        case SceneLayout::OccludedCavity: generate_occluded_cavity(spec, rng, out); break;
    }
    validate(out.scene);
    return out;
}

CameraIntrinsics CameraIntrinsics::from_fov(int width, int height, double fov_x_deg) {
    CameraIntrinsics intr;
    intr.width = width;
    intr.height = height;
    intr.fx = (width / 2.0) / std::tan(fov_x_deg * M_PI / 360.0);
    intr.fy = intr.fx;
    intr.cx = width / 2.0;
    intr.cy = height / 2.0;
    return intr;
}

ViewpointSet sample_sphere_viewpoints(int n, double radius, const Vec3& center,
                                      uint64_t seed, const CameraIntrinsics& intr,
                                      bool hemisphere) {
    if (n < 1) throw std::invalid_argument("sample_sphere_viewpoints: n >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("sample_sphere_viewpoints: radius > 0");

    Rng rng = substream(seed, "viewpoints");
    double phi_offset = rng.uniform(0.0, 2.0 * M_PI);
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;

    ViewpointSet vps;
    for (int i = 0; i < n; ++i) {
        double z = hemisphere ? 1.0 - (i + 0.5) / n          // z in (0, 1]
                              : 1.0 - 2.0 * (i + 0.5) / n;   // z in (-1, 1)
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double phi = 2.0 * M_PI * std::fmod(double(i) / golden, 1.0) + phi_offset;
        Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
        Vec3 pos = center + radius * dir;
        vps.cameras.push_back(look_at(pos, center, intr.fx, intr.fy, intr.cx, intr.cy,
                                      intr.width, intr.height));
    }
    vps.selected_mask.assign(size_t(n), false);
    return vps;
}

std::vector<Camera> interpolate_path(const Camera& a, const Camera& b, int k) {
    if (k < 2) throw std::invalid_argument("interpolate_path: k >= 2");
    if (!a.same_intrinsics(b))
        throw std::invalid_argument("interpolate_path: cameras have mismatched intrinsics");

    Quat qa(a.rotation), qb(b.rotation);
    Vec3 pa = a.position(), pb = b.position();

    std::vector<Camera> path;
    path.reserve(size_t(k));
    for (int i = 0; i < k; ++i) {
        if (i == 0) {
            path.push_back(a);
            continue;
        }
        if (i == k - 1) {
            path.push_back(b);
            continue;
        }
        double t = double(i) / double(k - 1);
        Quat q = qa.slerp(t, qb);
        Vec3 p = (1.0 - t) * pa + t * pb;
        Camera cam = a;
        cam.rotation = q.normalized().toRotationMatrix();
        cam.translation = -cam.rotation * p;
        path.push_back(cam);
    }
    return path;
}

}  // namespace splatscan
