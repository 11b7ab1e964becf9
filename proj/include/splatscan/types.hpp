// Core geometric types: Gaussian primitives, scenes, cameras and viewpoint
// sets, with validation and JSON (de)serialization.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace splatscan {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// One splatting primitive. Covariance is stored factored as scales (per-axis
// std-dev) plus a unit quaternion so it stays positive definite under
// optimization: Sigma = R * diag(scales^2) * R^T.
struct Gaussian3D {
    Vec3 mean = Vec3::Zero();
    Vec3 scales = Vec3::Ones();
    Quat rotation = Quat::Identity();  // unit quaternion
    Vec3 color = Vec3::Constant(0.5);  // RGB in [0,1]
    double opacity = 0.5;              // in (0,1)

    Mat3 covariance() const {
        Mat3 r = rotation.normalized().toRotationMatrix();
        return r * scales.cwiseProduct(scales).asDiagonal() * r.transpose();
    }
};

struct Scene {
    std::vector<Gaussian3D> gaussians;  // ordering is stable and meaningful
    Vec3 background_color = Vec3::Zero();
};

// Pinhole camera with world-to-camera rigid pose. Camera frame: x right,
// y down, z forward; a point p_world maps to rotation * p_world + translation.
struct Camera {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 world_to_camera(const Vec3& p) const { return rotation * p + translation; }
    Vec3 position() const { return -rotation.transpose() * translation; }
    Vec3 forward() const { return rotation.row(2).transpose(); }

    bool same_intrinsics(const Camera& o) const {
        return fx == o.fx && fy == o.fy && cx == o.cx && cy == o.cy &&
               width == o.width && height == o.height;
    }
};

struct ViewpointSet {
    std::vector<Camera> cameras;
    std::vector<bool> selected_mask;  // same length as cameras
};

// Builds a world-to-camera pose at `position` looking at `target`. Up vector
// is world +z, falling back to +y when the view direction is parallel to z.
Camera look_at(const Vec3& position, const Vec3& target, double fx, double fy,
               double cx, double cy, int width, int height);

// Validation. Throws std::invalid_argument with the offending index/field.
void validate(const Gaussian3D& g, int index = -1);
void validate(const Scene& scene);
void validate(const Camera& cam);

// Diagonal of the axis-aligned bounding box of the Gaussian means, floored at
// a small epsilon. Used as the unit for depth normalization.
double scene_diameter(const Scene& scene);

// JSON round trip. Floats are written at full precision so serialization is
// lossless. Throws std::runtime_error on IO/parse failures.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

std::string viewpoints_to_json(const ViewpointSet& vps);
ViewpointSet viewpoints_from_json(const std::string& text);
void save_viewpoints(const ViewpointSet& vps, const std::string& path);
ViewpointSet load_viewpoints(const std::string& path);

}  // namespace splatscan
