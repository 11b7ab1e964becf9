#include "splatscan/types.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace splatscan {

using nlohmann::json;

Camera look_at(const Vec3& position, const Vec3& target, double fx, double fy,
               double cx, double cy, int width, int height) {
    Vec3 fwd = target - position;
    double n = fwd.norm();
    if (n < 1e-12) throw std::invalid_argument("look_at: position coincides with target");
    fwd /= n;

    Vec3 up = Vec3(0, 0, 1);
    if (fwd.cross(up).norm() < 1e-8) up = Vec3(0, 1, 0);

    Vec3 x_axis = fwd.cross(up).normalized();
    Vec3 y_axis = fwd.cross(x_axis);  // points "down" in image space

    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = width;
    cam.height = height;
    cam.rotation.row(0) = x_axis.transpose();
    cam.rotation.row(1) = y_axis.transpose();
    cam.rotation.row(2) = fwd.transpose();
    cam.translation = -cam.rotation * position;
    return cam;
}

namespace {

std::string idx_str(int index) {
    return index < 0 ? std::string() : " (gaussian " + std::to_string(index) + ")";
}

}  // namespace

void validate(const Gaussian3D& g, int index) {
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("invalid Gaussian3D" + idx_str(index) + ": " + what);
    };
    for (int i = 0; i < 3; ++i) {
        if (!std::isfinite(g.mean[i])) fail("non-finite mean");
        if (!std::isfinite(g.scales[i]) || g.scales[i] <= 0.0) fail("scales must be positive and finite");
        if (!std::isfinite(g.color[i]) || g.color[i] < 0.0 || g.color[i] > 1.0) fail("color out of [0,1]");
    }
    double qn = g.rotation.norm();
    if (!std::isfinite(qn) || std::abs(qn - 1.0) > 1e-6) fail("quaternion not unit");
    if (!std::isfinite(g.opacity) || g.opacity <= 0.0 || g.opacity >= 1.0) fail("opacity out of (0,1)");
}

void validate(const Scene& scene) {
    for (size_t i = 0; i < scene.gaussians.size(); ++i) validate(scene.gaussians[i], int(i));
    for (int i = 0; i < 3; ++i) {
        double b = scene.background_color[i];
        if (!std::isfinite(b) || b < 0.0 || b > 1.0)
            throw std::invalid_argument("invalid Scene: background color out of [0,1]");
    }
}

void validate(const Camera& cam) {
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0))
        throw std::invalid_argument("invalid Camera: focal lengths must be positive");
    if (cam.width < 1 || cam.height < 1)
        throw std::invalid_argument("invalid Camera: degenerate image dimensions");
    Mat3 rtr = cam.rotation.transpose() * cam.rotation;
    if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
        std::abs(cam.rotation.determinant() - 1.0) > 1e-6)
        throw std::invalid_argument("invalid Camera: rotation not in SO(3)");
}

double scene_diameter(const Scene& scene) {
    if (scene.gaussians.empty()) return 1.0;
    Vec3 lo = scene.gaussians.front().mean;
    Vec3 hi = lo;
    for (const auto& g : scene.gaussians) {
        lo = lo.cwiseMin(g.mean);
        hi = hi.cwiseMax(g.mean);
    }
    return std::max((hi - lo).norm(), 1e-9);
}

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected 3-element array");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json mat3_to_json(const Mat3& m) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
    return rows;
}

Mat3 mat3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected 3x3 array");
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

json camera_to_json(const Camera& c) {
    return json{{"fx", c.fx},       {"fy", c.fy},
                {"cx", c.cx},       {"cy", c.cy},
                {"width", c.width}, {"height", c.height},
                {"rotation", mat3_to_json(c.rotation)},
                {"translation", vec3_to_json(c.translation)}};
}

Camera camera_from_json(const json& j) {
    Camera c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.rotation = mat3_from_json(j.at("rotation"));
    c.translation = vec3_from_json(j.at("translation"));
    return c;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const std::string& text, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << text;
    if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
    json gs = json::array();
    for (const auto& g : scene.gaussians) {
        gs.push_back(json{
            {"mean", vec3_to_json(g.mean)},
            {"scales", vec3_to_json(g.scales)},
            {"rotation_quat_wxyz",
             json::array({g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()})},
            {"color", vec3_to_json(g.color)},
            {"opacity", g.opacity}});
    }
    json j{{"gaussians", gs}, {"background_color", vec3_to_json(scene.background_color)}};
    return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("scene JSON parse error: ") + e.what());
    }
    Scene scene;
    scene.background_color = vec3_from_json(j.at("background_color"));
    for (const auto& jg : j.at("gaussians")) {
        Gaussian3D g;
        g.mean = vec3_from_json(jg.at("mean"));
        g.scales = vec3_from_json(jg.at("scales"));
        const auto& q = jg.at("rotation_quat_wxyz");
        g.rotation = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                          q[3].get<double>());
        g.color = vec3_from_json(jg.at("color"));
        g.opacity = jg.at("opacity").get<double>();
        scene.gaussians.push_back(g);
    }
    return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
    write_file(scene_to_json(scene), path);
}

Scene load_scene(const std::string& path) {
    try {
        return scene_from_json(read_file(path));
    } catch (const std::exception& e) {
        throw std::runtime_error("load_scene(" + path + "): " + e.what());
    }
}

std::string viewpoints_to_json(const ViewpointSet& vps) {
    json cams = json::array();
    for (const auto& c : vps.cameras) cams.push_back(camera_to_json(c));
    json j{{"cameras", cams}, {"selected_mask", vps.selected_mask}};
    return j.dump(2);
}

ViewpointSet viewpoints_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("viewpoints JSON parse error: ") + e.what());
    }
    ViewpointSet vps;
    for (const auto& jc : j.at("cameras")) vps.cameras.push_back(camera_from_json(jc));
    vps.selected_mask = j.at("selected_mask").get<std::vector<bool>>();
    if (vps.selected_mask.size() != vps.cameras.size())
        throw std::runtime_error("viewpoints JSON: mask/camera size mismatch");
    return vps;
}

void save_viewpoints(const ViewpointSet& vps, const std::string& path) {
    write_file(viewpoints_to_json(vps), path);
}

ViewpointSet load_viewpoints(const std::string& path) {
    try {
        return viewpoints_from_json(read_file(path));
    } catch (const std::exception& e) {
        throw std::runtime_error("load_viewpoints(" + path + "): " + e.what());
    }
}

}  // namespace splatscan
