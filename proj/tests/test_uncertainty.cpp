#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "splatscan/ssim.hpp"
#include "splatscan/uncertainty.hpp"

using namespace splatscan;
using test_helpers::random_image;
using test_helpers::random_scene;

namespace {

// Independent SSIM reference: direct 2D windowed statistics with per-pixel
// border renormalization, written from the formula.
double reference_ssim_at(const Image& a, const Image& b, int x, int y, int c) {
    const int R = 5;
    const double sigma = 1.5;
    double sw = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int dy = -R; dy <= R; ++dy) {
        for (int dx = -R; dx <= R; ++dx) {
            int xx = x + dx, yy = y + dy;
            if (xx < 0 || xx >= a.width || yy < 0 || yy >= a.height) continue;
            double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            double va = a.at(xx, yy, c), vb = b.at(xx, yy, c);
            sw += w;
            sa += w * va;
            sb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
        }
    }
    double mu_a = sa / sw, mu_b = sb / sw;
    double var_a = saa / sw - mu_a * mu_a, var_b = sbb / sw - mu_b * mu_b;
    double cov = sab / sw - mu_a * mu_b;
    double c1 = 1e-4, c2 = 9e-4;
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

RenderResult constant_render(int w, int h, double color, double depth, double alpha) {
    RenderResult rr;
    rr.color = Image(w, h, 3, color);
    rr.depth = Image(w, h, 1, depth);
    rr.alpha = Image(w, h, 1, alpha);
    return rr;
}

}  // namespace

TEST_CASE("ssim of an image with itself is all ones") {
    Rng rng(5);
    Image a = random_image(rng, 9, 7, 3);
    Image map = ssim_map(a, a);
    for (double v : map.data) CHECK(std::abs(v - 1.0) < 1e-12);
}

TEST_CASE("ssim closed forms on constant images") {
    Image half_a(8, 8, 1, 0.5), half_b(8, 8, 1, 0.5);
    Image map = ssim_map(half_a, half_b);
    for (double v : map.data) CHECK(std::abs(v - 1.0) < 1e-12);

    Image zero(8, 8, 1, 0.0), one(8, 8, 1, 1.0);
    double expected = kSsimC1 / (1.0 + kSsimC1);
    Image map2 = ssim_map(zero, one);
    for (double v : map2.data) CHECK(std::abs(v - expected) < 1e-12);
}

TEST_CASE("ssim map matches the independent windowed-statistics reference") {
    Rng rng(31);
    Image a = random_image(rng, 8, 8, 3);
    Image b = random_image(rng, 8, 8, 3);
    Image map = ssim_map(a, b);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            double want = 0.0;
            for (int c = 0; c < 3; ++c) want += reference_ssim_at(a, b, x, y, c);
            want /= 3.0;
            CHECK(std::abs(map.at(x, y, 0) - want) < 1e-7);
        }
    }
}

TEST_CASE("ssim is symmetric in its arguments") {
    Rng rng(77);
    Image a = random_image(rng, 10, 6, 3);
    Image b = random_image(rng, 10, 6, 3);
    Image ab = ssim_map(a, b);
    Image ba = ssim_map(b, a);
    CHECK(test_helpers::max_abs_diff(ab, ba) < 1e-12);
}

TEST_CASE("ssim rejects mismatched dimensions") {
    CHECK_THROWS_AS(ssim_map(Image(4, 4, 1), Image(4, 5, 1)), std::invalid_argument);
}

TEST_CASE("oracle uncertainty is zero on identical images") {
    Rng rng(11);
    Image a = random_image(rng, 12, 12, 3);
    UncertaintyMap u = oracle_uncertainty(a, a);
    for (double v : u.data) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("uncertainty mapping hits the range endpoints") {
    CHECK(uncertainty_from_ssim(-1.0) == 1.0);
    CHECK(uncertainty_from_ssim(1.0) == 0.0);
    CHECK(uncertainty_from_ssim(0.0) == 0.5);
    // Anti-correlated checkerboards drive SSIM near -1 and uncertainty near 1.
    Image a(16, 16, 1), b(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            double v = ((x + y) % 2 == 0) ? 1.0 : 0.0;
            a.at(x, y, 0) = v;
            b.at(x, y, 0) = 1.0 - v;
        }
    UncertaintyMap u = oracle_uncertainty(a, b);
    CHECK(u.at(8, 8, 0) > 0.99);
}

TEST_CASE("oracle uncertainty equals the ssim recomputation elementwise") {
    Rng rng(23);
    Image a = random_image(rng, 9, 9, 3);
    Image b = random_image(rng, 9, 9, 3);
    UncertaintyMap u = oracle_uncertainty(a, b);
    Image s = ssim_map(a, b);
    for (size_t i = 0; i < u.data.size(); ++i)
        CHECK(std::abs(u.data[i] - std::clamp((1.0 - s.data[i]) / 2.0, 0.0, 1.0)) < 1e-12);
}

TEST_CASE("depth oracle clamps the normalized absolute error") {
    Image d1(4, 4, 1, 1.0), d2(4, 4, 1, 1.3);
    UncertaintyMap u = oracle_depth_uncertainty(d1, d2, 2.0);
    for (double v : u.data) CHECK(std::abs(v - 0.15) < 1e-12);
    UncertaintyMap clamped = oracle_depth_uncertainty(d1, d2, 0.1);
    for (double v : clamped.data) CHECK(v == 1.0);
}

TEST_CASE("heuristic uncertainty is zero on a constant fully covered render") {
    RenderResult rr = constant_render(8, 8, 0.6, 1.2, 1.0);
    FeatureConfig fc;
    fc.depth_scale = 2.0;
    auto [r, d] = heuristic_uncertainty(rr, fc);
    for (double v : r.data) CHECK(std::abs(v) < 1e-12);
    for (double v : d.data) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("uncovered pixels score at least the coverage weight") {
    RenderResult rr = constant_render(8, 8, 0.6, 1.2, 1.0);
    rr.alpha.at(3, 4, 0) = 0.0;
    FeatureConfig fc;
    fc.depth_scale = 2.0;
    auto [r, d] = heuristic_uncertainty(rr, fc);
    CHECK(r.at(3, 4, 0) >= fc.w_cov);
    CHECK(d.at(3, 4, 0) >= fc.wd_cov);
}

TEST_CASE("depth uncertainty peaks on a step edge") {
    // 5x5 depth plane with a step between columns 1 and 2; hand-computed
    // central differences give gradient 0.3 at columns 1 and 2, zero elsewhere.
    RenderResult rr = constant_render(5, 5, 0.5, 0.0, 1.0);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) rr.depth.at(x, y, 0) = x <= 1 ? 0.2 : 0.8;
    FeatureConfig fc;
    fc.depth_scale = 1.0;
    auto [r, d] = heuristic_uncertainty(rr, fc);
    double expected_peak = fc.wd_grad * std::tanh(0.3 / fc.grad_scale);
    for (int y = 0; y < 5; ++y) {
        CHECK(std::abs(d.at(1, y, 0) - expected_peak) < 1e-12);
        CHECK(std::abs(d.at(2, y, 0) - expected_peak) < 1e-12);
        CHECK(d.at(0, y, 0) < 1e-12);
        CHECK(d.at(4, y, 0) < 1e-12);
        CHECK(d.at(1, y, 0) > d.at(0, y, 0));
    }
}

TEST_CASE("predictor outputs stay in [0,1] on random renders") {
    Rng rng(404);
    FeatureConfig fc;
    fc.depth_scale = 2.0;
    for (int trial = 0; trial < 5; ++trial) {
        Scene scene = random_scene(rng, 6);
        Camera cam = test_helpers::test_camera(12, 12);
        RenderResult rr = render(scene, cam);
        auto [r, d] = heuristic_uncertainty(rr, fc);
        for (double v : r.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (double v : d.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("ridge regression recovers an exact linear labeling") {
    Rng rng(808);
    FeatureConfig fc;
    fc.depth_scale = 2.0;
    UqDataset ds;
    for (int s = 0; s < 2; ++s) {
        UqSample sample;
        Scene scene = random_scene(rng, 5);
        sample.render = render(scene, test_helpers::test_camera(12, 12, 2.5, 0.3 + s, 0.2));
        std::vector<Image> f = uncertainty_features(sample.render, fc);
        sample.oracle_r = Image(12, 12, 1);
        sample.oracle_d = Image(12, 12, 1);
        for (size_t i = 0; i < sample.oracle_r.data.size(); ++i) {
            sample.oracle_r.data[i] =
                0.3 + 0.05 * f[0].data[i] - 0.04 * f[3].data[i] + 0.02 * f[4].data[i];
            sample.oracle_d.data[i] = 0.2 + 0.1 * f[2].data[i];
        }
        ds.samples.push_back(std::move(sample));
    }
    PatchRegressorModel m = train_patch_regressor(ds, RegressionTarget::Render, fc);
    double mse = 0.0;
    size_t n = 0;
    for (const auto& s : ds.samples) {
        UncertaintyMap pred = predict(m, s.render, fc);
        for (size_t i = 0; i < pred.data.size(); ++i, ++n) {
            double e = pred.data[i] - s.oracle_r.data[i];
            mse += e * e;
        }
    }
    mse /= double(n);
    CHECK(mse < 1e-8);
}

TEST_CASE("all-zero labels give near-zero weights and predictions") {
    Rng rng(909);
    FeatureConfig fc;
    fc.depth_scale = 2.0;
    UqDataset ds;
    UqSample sample;
    sample.render = render(random_scene(rng, 4), test_helpers::test_camera(10, 10));
    sample.oracle_r = Image(10, 10, 1, 0.0);
    sample.oracle_d = Image(10, 10, 1, 0.0);
    ds.samples.push_back(std::move(sample));

    PatchRegressorModel m = train_patch_regressor(ds, RegressionTarget::Render, fc);
    for (double w : m.weights) CHECK(std::abs(w) < 1e-6);
    UncertaintyMap pred = predict(m, ds.samples[0].render, fc);
    for (double v : pred.data) CHECK(v < 1e-6);
}

TEST_CASE("model JSON round trip") {
    PatchRegressorModel m;
    m.feature_names = uncertainty_feature_names();
    m.weights.assign(m.feature_names.size(), 0.25);
    m.weights[2] = -1.5;
    m.bias = 0.125;
    m.norm_mean.assign(m.feature_names.size(), 0.5);
    m.norm_std.assign(m.feature_names.size(), 2.0);
    PatchRegressorModel back = model_from_json(model_to_json(m));
    CHECK(back.weights == m.weights);
    CHECK(back.bias == m.bias);
    CHECK(back.feature_names == m.feature_names);
    CHECK(model_to_json(back) == model_to_json(m));
}

namespace {

BuildConfig small_build_config() {
    BuildConfig bc;
    bc.intrinsics = CameraIntrinsics::from_fov(24, 24, 50.0);
    bc.view_radius = 2.5;
    bc.fit_iters = 150;
    bc.n_init_gaussians = 40;
    bc.init_bounds = Vec3::Ones();
    return bc;
}

double mean_of(const Image& img) {
    double acc = 0.0;
    for (double v : img.data) acc += v;
    return acc / double(img.data.size());
}

}  // namespace

TEST_CASE("training-set ladder: fewer views means higher oracle uncertainty") {
    BuildConfig bc = small_build_config();
    int wins = 0;
    for (uint64_t seed : {101ULL, 102ULL, 103ULL}) {
        SceneSpec spec;
        spec.seed = seed;
        spec.n_gaussians = 40;
        spec.layout = SceneLayout::BlobCluster;
        Scene gt = generate_synthetic_scene(spec).scene;
        std::vector<Camera> holdouts =
            sample_sphere_viewpoints(6, bc.view_radius, Vec3::Zero(), seed + 50, bc.intrinsics)
                .cameras;
        UqDataset ds = build_training_set(gt, {2, 20}, holdouts, seed, bc);
        REQUIRE(ds.samples.size() == 12);
        double mean_low = 0.0, mean_high = 0.0;
        for (int h = 0; h < 6; ++h) {
            mean_low += mean_of(ds.samples[size_t(h)].oracle_r);
            mean_high += mean_of(ds.samples[size_t(6 + h)].oracle_r);
        }
        if (mean_low >= mean_high) ++wins;
    }
    // Statistical monotone-quality property; allow one inversion.
    CHECK(wins >= 2);
}

TEST_CASE("empty holdout set gives an empty dataset") {
    SceneSpec spec;
    spec.seed = 4;
    spec.n_gaussians = 10;
    spec.layout = SceneLayout::BlobCluster;
    Scene gt = generate_synthetic_scene(spec).scene;
    UqDataset ds = build_training_set(gt, {2, 3}, {}, 5, small_build_config());
    CHECK(ds.samples.empty());
}

TEST_CASE("training set is deterministic and survives the cache round trip") {
    BuildConfig bc = small_build_config();
    bc.fit_iters = 40;
    SceneSpec spec;
    spec.seed = 15;
    spec.n_gaussians = 15;
    spec.layout = SceneLayout::TexturedBox;
    Scene gt = generate_synthetic_scene(spec).scene;
    std::vector<Camera> holdouts =
        sample_sphere_viewpoints(3, bc.view_radius, Vec3::Zero(), 8, bc.intrinsics).cameras;

    UqDataset a = build_training_set(gt, {2, 4}, holdouts, 99, bc);
    UqDataset b = build_training_set(gt, {2, 4}, holdouts, 99, bc);
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].render.color.data == b.samples[i].render.color.data);
        CHECK(a.samples[i].oracle_r.data == b.samples[i].oracle_r.data);
    }

    std::string dir = test_helpers::temp_dir("uq_dataset");
    save_dataset(a, dir);
    UqDataset back = load_dataset(dir);
    REQUIRE(back.samples.size() == a.samples.size());
    // float32 cache: lossy to ~1e-7 relative
    CHECK(test_helpers::max_abs_diff(back.samples[0].oracle_r, a.samples[0].oracle_r) < 1e-6);
    std::filesystem::remove_all(dir);
}

TEST_CASE("trained regressor correlates with the oracle on a held-out scene") {
    BuildConfig bc = small_build_config();
    FeatureConfig fc;
    fc.depth_scale = 0.0;  // set below per scene

    // Train on two scenes, evaluate on a third.
    UqDataset train;
    for (uint64_t seed : {301ULL, 302ULL}) {
        SceneSpec spec;
        spec.seed = seed;
        spec.n_gaussians = 40;
        spec.layout = SceneLayout::BlobCluster;
        Scene gt = generate_synthetic_scene(spec).scene;
        std::vector<Camera> holdouts =
            sample_sphere_viewpoints(6, bc.view_radius, Vec3::Zero(), seed + 9, bc.intrinsics)
                .cameras;
        UqDataset ds = build_training_set(gt, {3, 8}, holdouts, seed, bc);
        for (auto& s : ds.samples) train.samples.push_back(std::move(s));
    }
    FeatureConfig fc_train;
    fc_train.depth_scale = 2.0;
    PatchRegressorModel model = train_patch_regressor(train, RegressionTarget::Render, fc_train);

    SceneSpec spec;
    spec.seed = 999;
    spec.n_gaussians = 40;
    spec.layout = SceneLayout::BlobCluster;
    Scene gt = generate_synthetic_scene(spec).scene;
    std::vector<Camera> holdouts =
        sample_sphere_viewpoints(6, bc.view_radius, Vec3::Zero(), 1009, bc.intrinsics).cameras;
    UqDataset test = build_training_set(gt, {4}, holdouts, 777, bc);

    // Pixelwise Pearson correlation between prediction and oracle.
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    size_t n = 0;
    for (const auto& s : test.samples) {
        UncertaintyMap pred = predict(model, s.render, fc_train);
        for (size_t i = 0; i < pred.data.size(); ++i, ++n) {
            double x = pred.data[i], y = s.oracle_r.data[i];
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
    }
    double cov = sxy / n - (sx / n) * (sy / n);
    double vx = sxx / n - (sx / n) * (sx / n);
    double vy = syy / n - (sy / n) * (sy / n);
    double corr = cov / std::sqrt(vx * vy);
    CHECK(corr > 0.3);
}
