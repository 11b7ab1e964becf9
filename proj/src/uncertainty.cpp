#include "splatscan/uncertainty.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <stdexcept>

#include "splatscan/rng.hpp"
#include "splatscan/scene_gen.hpp"
#include "splatscan/ssim.hpp"

namespace splatscan {

using nlohmann::json;
namespace fs = std::filesystem;

UncertaintyMap oracle_uncertainty(const Image& rendered, const Image& gt) {
    Image map = ssim_map(rendered, gt);
    for (double& v : map.data) v = uncertainty_from_ssim(v);
    return map;
}

UncertaintyMap oracle_depth_uncertainty(const Image& rendered_depth, const Image& gt_depth,
                                        double depth_scale) {
    if (!rendered_depth.same_dims(gt_depth))
        throw std::invalid_argument("oracle_depth_uncertainty: dimensions differ");
    if (!(depth_scale > 0.0))
        throw std::invalid_argument("oracle_depth_uncertainty: depth_scale must be positive");
    Image map(rendered_depth.width, rendered_depth.height, 1);
    for (size_t i = 0; i < map.data.size(); ++i)
        map.data[i] = std::clamp(
            std::abs(rendered_depth.data[i] - gt_depth.data[i]) / depth_scale, 0.0, 1.0);
    return map;
}

namespace {

double luminance(const Image& img, int x, int y) {
    return (img.at(x, y, 0) + img.at(x, y, 1) + img.at(x, y, 2)) / 3.0;
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

std::vector<std::string> uncertainty_feature_names() {
    return {"color_var", "laplacian", "one_minus_alpha", "depth_grad",
            "mean_r",    "mean_g",    "mean_b",          "mean_depth"};
}

std::vector<Image> uncertainty_features(const RenderResult& rr, const FeatureConfig& cfg) {
    const int W = rr.color.width, H = rr.color.height;
    if (rr.depth.width != W || rr.depth.height != H || rr.alpha.width != W ||
        rr.alpha.height != H)
        throw std::invalid_argument("uncertainty_features: inconsistent render result");

    std::vector<Image> f(8, Image(W, H, 1));

    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            // 3x3 neighborhood statistics with border clamping.
            double sum = 0, sum2 = 0;
            Vec3 mean_rgb = Vec3::Zero();
            double mean_depth = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    int xx = clampi(x + dx, 0, W - 1), yy = clampi(y + dy, 0, H - 1);
                    double l = luminance(rr.color, xx, yy);
                    sum += l;
                    sum2 += l * l;
                    for (int c = 0; c < 3; ++c) mean_rgb[c] += rr.color.at(xx, yy, c);
                    mean_depth += rr.depth.at(xx, yy, 0);
                }
            }
            double mu = sum / 9.0;
            double var = std::max(0.0, sum2 / 9.0 - mu * mu);
            mean_rgb /= 9.0;
            mean_depth /= 9.0;

            double l_c = luminance(rr.color, x, y);
            double lap = luminance(rr.color, clampi(x - 1, 0, W - 1), y) +
                         luminance(rr.color, clampi(x + 1, 0, W - 1), y) +
                         luminance(rr.color, x, clampi(y - 1, 0, H - 1)) +
                         luminance(rr.color, x, clampi(y + 1, 0, H - 1)) - 4.0 * l_c;

            double dn = 1.0 / cfg.depth_scale;
            double gx = 0.5 * (rr.depth.at(clampi(x + 1, 0, W - 1), y, 0) -
                               rr.depth.at(clampi(x - 1, 0, W - 1), y, 0)) * dn;
            double gy = 0.5 * (rr.depth.at(x, clampi(y + 1, 0, H - 1), 0) -
                               rr.depth.at(x, clampi(y - 1, 0, H - 1), 0)) * dn;

            f[0].at(x, y, 0) = std::tanh(var / cfg.var_scale);
            f[1].at(x, y, 0) = std::tanh(std::abs(lap) / cfg.lap_scale);
            f[2].at(x, y, 0) = 1.0 - rr.alpha.at(x, y, 0);
            f[3].at(x, y, 0) = std::tanh(std::sqrt(gx * gx + gy * gy) / cfg.grad_scale);
            f[4].at(x, y, 0) = mean_rgb[0];
            f[5].at(x, y, 0) = mean_rgb[1];
            f[6].at(x, y, 0) = mean_rgb[2];
            f[7].at(x, y, 0) = mean_depth * dn;
        }
    }
    return f;
}

std::pair<UncertaintyMap, UncertaintyMap> heuristic_uncertainty(const RenderResult& rr,
                                                                const FeatureConfig& cfg) {
    std::vector<Image> f = uncertainty_features(rr, cfg);
    const int W = rr.color.width, H = rr.color.height;
    UncertaintyMap r(W, H, 1), d(W, H, 1);
    for (size_t i = 0; i < r.data.size(); ++i) {
        r.data[i] = std::clamp(cfg.w_var * f[0].data[i] + cfg.w_lap * f[1].data[i] +
                                   cfg.w_cov * f[2].data[i],
                               0.0, 1.0);
        d.data[i] = std::clamp(cfg.wd_grad * f[3].data[i] + cfg.wd_cov * f[2].data[i], 0.0, 1.0);
    }
    return {r, d};
}

std::string model_to_json(const PatchRegressorModel& m) {
    json j{{"feature_names", m.feature_names},
           {"weights", m.weights},
           {"bias", m.bias},
           {"normalization", json{{"mean", m.norm_mean}, {"std", m.norm_std}}}};
    return j.dump(2);
}

PatchRegressorModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("model JSON parse error: ") + e.what());
    }
    PatchRegressorModel m;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.norm_mean = j.at("normalization").at("mean").get<std::vector<double>>();
    m.norm_std = j.at("normalization").at("std").get<std::vector<double>>();
    if (m.weights.size() != m.feature_names.size() || m.norm_mean.size() != m.weights.size() ||
        m.norm_std.size() != m.weights.size())
        throw std::runtime_error("model JSON: inconsistent feature counts");
    return m;
}

void save_model(const PatchRegressorModel& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_model: cannot open " + path);
    os << model_to_json(m);
}

PatchRegressorModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_model: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return model_from_json(text);
}

UqDataset build_training_set(const Scene& gt_scene, const std::vector<int>& train_view_counts,
                             const std::vector<Camera>& holdout_views, uint64_t seed,
                             const BuildConfig& bc) {
    for (int c : train_view_counts)
        if (c < 2) throw std::invalid_argument("build_training_set: view counts must be >= 2");

    UqDataset ds;
    if (holdout_views.empty()) return ds;

    double depth_scale = bc.depth_scale > 0.0 ? bc.depth_scale : scene_diameter(gt_scene);

    std::vector<Image> gt_colors, gt_depths;
    for (const Camera& cam : holdout_views) {
        RenderResult rr = render(gt_scene, cam, bc.render);
        gt_colors.push_back(std::move(rr.color));
        gt_depths.push_back(std::move(rr.depth));
    }

    for (size_t ci = 0; ci < train_view_counts.size(); ++ci) {
        int count = train_view_counts[ci];
        uint64_t fit_seed = substream_seed(seed, "uq-ladder") + 977 * ci;
        ViewpointSet train_vps = sample_sphere_viewpoints(
            count, bc.view_radius, Vec3::Zero(), fit_seed, bc.intrinsics);

        TrainState state;
        state.scene = init_scene(bc.init_bounds, bc.n_init_gaussians, fit_seed);
        state.rng_seed = fit_seed;
        for (const Camera& cam : train_vps.cameras) {
            RenderResult rr = render(gt_scene, cam, bc.render);
            state.active_views.push_back({cam, std::move(rr.color)});
        }
        OptimConfig opt = bc.optim;
        fit(state, opt, bc.render, bc.fit_iters);

        for (size_t h = 0; h < holdout_views.size(); ++h) {
            UqSample sample;
            sample.render = render(state.scene, holdout_views[h], bc.render);
            sample.oracle_r = oracle_uncertainty(sample.render.color, gt_colors[h]);
            sample.oracle_d =
                oracle_depth_uncertainty(sample.render.depth, gt_depths[h], depth_scale);
            ds.samples.push_back(std::move(sample));
        }
    }
    return ds;
}

void save_dataset(const UqDataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    json index;
    index["count"] = ds.samples.size();
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const UqSample& s = ds.samples[i];
        std::string stem = "sample_" + std::to_string(i);
        write_float_raw(s.render.color, dir + "/" + stem + "_color.raw");
        write_float_raw(s.render.depth, dir + "/" + stem + "_depth.raw");
        write_float_raw(s.render.alpha, dir + "/" + stem + "_alpha.raw");
        write_float_raw(s.oracle_r, dir + "/" + stem + "_oracle_r.raw");
        write_float_raw(s.oracle_d, dir + "/" + stem + "_oracle_d.raw");
    }
    std::ofstream os(dir + "/index.json", std::ios::binary);
    if (!os) throw std::runtime_error("save_dataset: cannot open index in " + dir);
    os << index.dump(2);
}

UqDataset load_dataset(const std::string& dir) {
    std::ifstream is(dir + "/index.json", std::ios::binary);
    if (!is) throw std::runtime_error("load_dataset: cannot open " + dir + "/index.json");
    json index = json::parse(is);
    size_t count = index.at("count").get<size_t>();
    UqDataset ds;
    for (size_t i = 0; i < count; ++i) {
        std::string stem = dir + "/sample_" + std::to_string(i);
        UqSample s;
        s.render.color = read_float_raw(stem + "_color.raw");
        s.render.depth = read_float_raw(stem + "_depth.raw");
        s.render.alpha = read_float_raw(stem + "_alpha.raw");
        s.oracle_r = read_float_raw(stem + "_oracle_r.raw");
        s.oracle_d = read_float_raw(stem + "_oracle_d.raw");
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

PatchRegressorModel train_patch_regressor(const UqDataset& ds, RegressionTarget target,
                                          const FeatureConfig& fc, double lambda_ridge) {
    if (ds.samples.empty()) throw std::invalid_argument("train_patch_regressor: empty dataset");

    const auto names = uncertainty_feature_names();
    const int F = int(names.size());

    // Accumulate normal equations over all pixels of all samples.
    size_t n_rows = 0;
    for (const auto& s : ds.samples) n_rows += s.render.color.pixel_count();

    Eigen::MatrixXd X(n_rows, F);
    Eigen::VectorXd y(n_rows);
    size_t row = 0;
    for (const auto& s : ds.samples) {
        std::vector<Image> f = uncertainty_features(s.render, fc);
        const Image& label = target == RegressionTarget::Render ? s.oracle_r : s.oracle_d;
        for (size_t p = 0; p < label.data.size(); ++p, ++row) {
            for (int k = 0; k < F; ++k) X(row, k) = f[size_t(k)].data[p];
            y(row) = label.data[p];
        }
    }

    PatchRegressorModel m;
    m.feature_names = names;
    m.norm_mean.resize(F);
    m.norm_std.resize(F);
    for (int k = 0; k < F; ++k) {
        double mu = X.col(k).mean();
        double sd = std::sqrt((X.col(k).array() - mu).square().mean());
        if (sd < 1e-12) sd = 1.0;  // constant feature: leave centered at zero
        m.norm_mean[k] = mu;
        m.norm_std[k] = sd;
        X.col(k) = (X.col(k).array() - mu) / sd;
    }
    double y_mean = y.mean();
    Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::VectorXd xty = X.transpose() * yc;
    Eigen::VectorXd w;
    double lam = lambda_ridge;
    for (int attempt = 0;; ++attempt) {
        Eigen::MatrixXd regularized = xtx + lam * Eigen::MatrixXd::Identity(F, F);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(regularized);
        w = ldlt.solve(xty);
        if (ldlt.info() == Eigen::Success && w.allFinite()) break;
        if (attempt >= 6)
            throw std::runtime_error("train_patch_regressor: normal matrix stayed singular");
        lam *= 10.0;
        std::cerr << "train_patch_regressor: near-singular normal matrix, raising ridge lambda to "
                  << lam << "\n";
    }

    m.weights.assign(w.data(), w.data() + F);
    m.bias = y_mean;
    return m;
}

UncertaintyMap predict(const PatchRegressorModel& m, const RenderResult& rr,
                       const FeatureConfig& fc) {
    std::vector<Image> f = uncertainty_features(rr, fc);
    if (m.weights.size() != f.size())
        throw std::invalid_argument("predict: model/feature count mismatch");
    UncertaintyMap out(rr.color.width, rr.color.height, 1);
    for (size_t p = 0; p < out.data.size(); ++p) {
        double acc = m.bias;
        for (size_t k = 0; k < f.size(); ++k)
            acc += m.weights[k] * (f[k].data[p] - m.norm_mean[k]) / m.norm_std[k];
        out.data[p] = std::clamp(acc, 0.0, 1.0);
    }
    return out;
}

PredictorKind parse_predictor_kind(const std::string& name) {
    if (name == "oracle") return PredictorKind::Oracle;
    if (name == "heuristic") return PredictorKind::Heuristic;
    if (name == "trained") return PredictorKind::Trained;
    throw std::invalid_argument("unknown predictor kind: '" + name + "'");
}

std::string predictor_kind_name(PredictorKind k) {
    switch (k) {
        case PredictorKind::Oracle: return "oracle";
        case PredictorKind::Heuristic: return "heuristic";
        case PredictorKind::Trained: return "trained";
    }
    return "?";
}

std::pair<UncertaintyMap, UncertaintyMap> Predictor::evaluate(
    const RenderResult& rr, const Camera& cam, const RenderResult* gt_render) const {
    switch (kind) {
        case PredictorKind::Oracle: {
            if (!gt_scene) throw std::logic_error("oracle predictor needs a ground-truth scene");
            RenderResult local;
            if (!gt_render) {
                local = render(*gt_scene, cam, render_cfg);
                gt_render = &local;
            }
            UncertaintyMap r = oracle_uncertainty(rr.color, gt_render->color);
            UncertaintyMap d =
                oracle_depth_uncertainty(rr.depth, gt_render->depth, features.depth_scale);
            return {std::move(r), std::move(d)};
        }
        case PredictorKind::Heuristic:
            return heuristic_uncertainty(rr, features);
        case PredictorKind::Trained: {
            UncertaintyMap r = predict(model_r, rr, features);
            UncertaintyMap d = predict(model_d, rr, features);
            return {std::move(r), std::move(d)};
        }
    }
    throw std::logic_error("unreachable predictor kind");
}

}  // namespace splatscan
