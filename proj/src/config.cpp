#include "splatscan/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "splatscan/rng.hpp"

namespace splatscan {

using nlohmann::json;

RunConfig default_run_config() { return RunConfig{}; }

std::string run_config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["resolution"] = json{{"width", c.width}, {"height", c.height}};
    j["camera"] = json{{"fov_x_deg", c.fov_x_deg}};
    j["scene"] = json{{"layout", layout_name(c.layout)},
                      {"n_gaussians", c.scene_gaussians},
                      {"bounds", json::array({c.bounds[0], c.bounds[1], c.bounds[2]})}};
    j["candidates"] = json{{"count", c.candidate_count},
                           {"radius", c.view_radius},
                           {"hemisphere", c.hemisphere}};
    j["test_views"] = json{{"count", c.test_view_count}};
    j["policy"] = json{{"kind", c.policy},
                       {"predictor", c.predictor},
                       {"ablation", c.ablation},
                       {"model_r", c.model_r_path},
                       {"model_d", c.model_d_path},
                       {"initial_views_random", c.initial_views_random}};
    j["scoring"] = json{{"lambda0", c.weights.lambda0},
                        {"lambda1", c.weights.lambda1},
                        {"lambda2", c.weights.lambda2},
                        {"normalize_depth", c.normalize_depth},
                        {"blend_mode", c.blend_mode}};
    j["optimizer"] = json{{"lr_mean", c.optim.lr_mean},
                          {"lr_scales", c.optim.lr_scales},
                          {"lr_rotation", c.optim.lr_rotation},
                          {"lr_color", c.optim.lr_color},
                          {"lr_opacity", c.optim.lr_opacity},
                          {"total_iters", c.optim.total_iters},
                          {"lambda_ssim", c.optim.lambda_ssim},
                          {"min_scale", c.optim.min_scale},
                          {"opacity_eps", c.optim.opacity_eps},
                          {"model_init_gaussians", c.model_init_gaussians},
                          {"densify", json{{"enabled", c.optim.densify.enabled},
                                           {"interval", c.optim.densify.interval},
                                           {"grad_threshold", c.optim.densify.grad_threshold},
                                           {"prune_opacity", c.optim.densify.prune_opacity},
                                           {"max_gaussians", c.optim.densify.max_gaussians}}}};
    j["render"] = json{{"near_plane", c.render.near_plane},
                       {"eps_cov", c.render.eps_cov},
                       {"alpha_max", c.render.alpha_max},
                       {"t_min", c.render.t_min},
                       {"normalize_depth_by_alpha", c.render.normalize_depth_by_alpha}};
    j["ablate_seeds"] = c.ablate_seeds;
    return j.dump(2);
}

namespace {

// Fetch with default: absent keys keep the built-in value so configs can be
// partial.
template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    RunConfig c;
    get_if(j, "seed", c.seed);
    get_if(j, "out_dir", c.out_dir);
    if (j.contains("resolution")) {
        get_if(j.at("resolution"), "width", c.width);
        get_if(j.at("resolution"), "height", c.height);
    }
    if (j.contains("camera")) get_if(j.at("camera"), "fov_x_deg", c.fov_x_deg);
    if (j.contains("scene")) {
        const json& js = j.at("scene");
        if (js.contains("layout")) c.layout = parse_layout(js.at("layout").get<std::string>());
        get_if(js, "n_gaussians", c.scene_gaussians);
        if (js.contains("bounds")) {
            const auto& b = js.at("bounds");
            c.bounds = Vec3(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>());
        }
    }
    if (j.contains("candidates")) {
        const json& jc = j.at("candidates");
        get_if(jc, "count", c.candidate_count);
        get_if(jc, "radius", c.view_radius);
        get_if(jc, "hemisphere", c.hemisphere);
    }
    if (j.contains("test_views")) get_if(j.at("test_views"), "count", c.test_view_count);
    if (j.contains("policy")) {
        const json& jp = j.at("policy");
        get_if(jp, "kind", c.policy);
        get_if(jp, "predictor", c.predictor);
        get_if(jp, "ablation", c.ablation);
        get_if(jp, "model_r", c.model_r_path);
        get_if(jp, "model_d", c.model_d_path);
        get_if(jp, "initial_views_random", c.initial_views_random);
    }
    if (j.contains("scoring")) {
        const json& js = j.at("scoring");
        get_if(js, "lambda0", c.weights.lambda0);
        get_if(js, "lambda1", c.weights.lambda1);
        get_if(js, "lambda2", c.weights.lambda2);
        get_if(js, "normalize_depth", c.normalize_depth);
        get_if(js, "blend_mode", c.blend_mode);
    }
    if (j.contains("optimizer")) {
        const json& jo = j.at("optimizer");
        get_if(jo, "lr_mean", c.optim.lr_mean);
        get_if(jo, "lr_scales", c.optim.lr_scales);
        get_if(jo, "lr_rotation", c.optim.lr_rotation);
        get_if(jo, "lr_color", c.optim.lr_color);
        get_if(jo, "lr_opacity", c.optim.lr_opacity);
        get_if(jo, "total_iters", c.optim.total_iters);
        get_if(jo, "lambda_ssim", c.optim.lambda_ssim);
        get_if(jo, "min_scale", c.optim.min_scale);
        get_if(jo, "opacity_eps", c.optim.opacity_eps);
        get_if(jo, "model_init_gaussians", c.model_init_gaussians);
        if (jo.contains("densify")) {
            const json& jd = jo.at("densify");
            get_if(jd, "enabled", c.optim.densify.enabled);
            get_if(jd, "interval", c.optim.densify.interval);
            get_if(jd, "grad_threshold", c.optim.densify.grad_threshold);
            get_if(jd, "prune_opacity", c.optim.densify.prune_opacity);
            get_if(jd, "max_gaussians", c.optim.densify.max_gaussians);
        }
    }
    if (j.contains("render")) {
        const json& jr = j.at("render");
        get_if(jr, "near_plane", c.render.near_plane);
        get_if(jr, "eps_cov", c.render.eps_cov);
        get_if(jr, "alpha_max", c.render.alpha_max);
        get_if(jr, "t_min", c.render.t_min);
        get_if(jr, "normalize_depth_by_alpha", c.render.normalize_depth_by_alpha);
    }
    get_if(j, "ablate_seeds", c.ablate_seeds);

    // Validate the cross-references early.
    parse_predictor_kind(c.predictor);
    parse_ablation(c.ablation);
    if (c.policy != "random" && c.policy != "oracle_ssim" && c.policy != "uq")
        throw std::runtime_error("config: unknown policy '" + c.policy + "'");
    if (c.blend_mode != "linear" && c.blend_mode != "squared")
        throw std::runtime_error("config: unknown blend_mode '" + c.blend_mode + "'");
    if (c.width < 1 || c.height < 1 || c.candidate_count < 1 || c.test_view_count < 1)
        throw std::runtime_error("config: degenerate dimensions or view counts");
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

std::string run_config_hash(const RunConfig& c) {
    // nlohmann::json keeps object keys sorted, so dump() is canonical.
    std::string dump = run_config_to_json(c);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : dump) {
        h ^= uint64_t(uint8_t(ch));
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

CameraIntrinsics config_intrinsics(const RunConfig& c) {
    return CameraIntrinsics::from_fov(c.width, c.height, c.fov_x_deg);
}

SceneSpec config_scene_spec(const RunConfig& c) {
    SceneSpec spec;
    spec.seed = c.seed;
    spec.n_gaussians = c.scene_gaussians;
    spec.layout = c.layout;
    spec.bounds = c.bounds;
    return spec;
}

ScoringConfig config_scoring(const RunConfig& c) {
    ScoringConfig s;
    s.normalize_depth = c.normalize_depth;
    s.depth_scale = 2.0 * c.bounds.norm();  // fixed content-box diagonal
    s.mode = c.blend_mode == "squared" ? BlendMode::Squared : BlendMode::Linear;
    return s;
}

Schedule config_schedule(const RunConfig& c) { return Schedule::rescaled(c.optim.total_iters); }

Policy config_policy(const RunConfig& c) {
    if (c.policy == "random") return Policy::random();
    if (c.policy == "oracle_ssim") return Policy::oracle_ssim();
    Policy::Ablation a = parse_ablation(c.ablation);
    return Policy::uq_ablation(a, c.weights);
}

ViewpointSet config_candidates(const RunConfig& c) {
    return sample_sphere_viewpoints(c.candidate_count, c.view_radius, Vec3::Zero(),
                                    substream_seed(c.seed, "candidates"), config_intrinsics(c),
                                    c.hemisphere);
}

std::vector<Camera> config_test_views(const RunConfig& c) {
    ViewpointSet vps = sample_sphere_viewpoints(c.test_view_count, c.view_radius, Vec3::Zero(),
                                                substream_seed(c.seed, "test-views"),
                                                config_intrinsics(c), c.hemisphere);
    return vps.cameras;
}

}  // namespace splatscan
