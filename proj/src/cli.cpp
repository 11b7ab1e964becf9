#include "splatscan/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <stdexcept>

#include "splatscan/rng.hpp"

namespace splatscan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_manifest(const RunConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream cf(dir + "/config.json", std::ios::binary);
    if (!cf) throw std::runtime_error("cannot write " + dir + "/config.json");
    cf << run_config_to_json(cfg);
    std::ofstream mf(dir + "/manifest.json", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write " + dir + "/manifest.json");
    mf << json{{"config_hash", run_config_hash(cfg)}, {"seed", cfg.seed}}.dump(2);
}

std::vector<Camera> canonical_views(const RunConfig& cfg) {
    CameraIntrinsics intr = config_intrinsics(cfg);
    double r = cfg.view_radius;
    std::vector<Camera> views;
    for (const Vec3& dir : {Vec3(1, 0, 0.35), Vec3(-1, 0, 0.35), Vec3(0, 1, 0.35),
                            Vec3(0, -1, 0.35)})
        views.push_back(look_at(r * dir.normalized(), Vec3::Zero(), intr.fx, intr.fy, intr.cx,
                                intr.cy, intr.width, intr.height));
    return views;
}

FeatureConfig config_features(const RunConfig& cfg) {
    FeatureConfig fc;
    fc.depth_scale = config_scoring(cfg).depth_scale;
    return fc;
}

ActiveLoopConfig make_loop_config(const RunConfig& cfg, const std::string& checkpoint_dir) {
    ActiveLoopConfig lc;
    lc.schedule = config_schedule(cfg);
    lc.policy = config_policy(cfg);
    lc.optim = cfg.optim;
    lc.render = cfg.render;
    lc.scoring = config_scoring(cfg);
    lc.model_init_gaussians = cfg.model_init_gaussians;
    lc.init_bounds = cfg.bounds;
    lc.seed = cfg.seed;
    lc.initial_views_random = cfg.initial_views_random;
    lc.checkpoint_dir = checkpoint_dir;
    lc.config_hash = run_config_hash(cfg);
    return lc;
}

}  // namespace

Predictor make_predictor(const RunConfig& cfg, const Scene& gt_scene) {
    Predictor p;
    p.kind = parse_predictor_kind(cfg.predictor);
    p.features = config_features(cfg);
    p.render_cfg = cfg.render;
    p.gt_scene = &gt_scene;

    if (p.kind == PredictorKind::Trained) {
        if (!cfg.model_r_path.empty() && !cfg.model_d_path.empty()) {
            p.model_r = load_model(cfg.model_r_path);
            p.model_d = load_model(cfg.model_d_path);
            return p;
        }
        // Self-contained fallback: train on scenes disjoint from the target
        // (seed offset) and cache the models in out_dir.
        std::cerr << "training patch regressor (no model paths configured)\n";
        BuildConfig bc;
        bc.intrinsics = config_intrinsics(cfg);
        bc.view_radius = cfg.view_radius;
        bc.optim = cfg.optim;
        bc.render = cfg.render;
        bc.init_bounds = cfg.bounds;
        bc.n_init_gaussians = cfg.model_init_gaussians;
        bc.fit_iters = std::max(200, cfg.optim.total_iters / 6);
        bc.depth_scale = p.features.depth_scale;

        SceneSpec spec = config_scene_spec(cfg);
        spec.seed = cfg.seed + 7777;  // never train on the scene being planned
        Scene train_scene = generate_synthetic_scene(spec).scene;
        std::vector<Camera> holdouts =
            sample_sphere_viewpoints(12, cfg.view_radius, Vec3::Zero(),
                                     substream_seed(spec.seed, "uq-holdout"),
                                     bc.intrinsics)
                .cameras;
        UqDataset ds = build_training_set(train_scene, {3, 6, 12}, holdouts, spec.seed, bc);
        p.model_r = train_patch_regressor(ds, RegressionTarget::Render, p.features);
        p.model_d = train_patch_regressor(ds, RegressionTarget::Depth, p.features);
        fs::create_directories(cfg.out_dir);
        save_model(p.model_r, cfg.out_dir + "/model_r.json");
        save_model(p.model_d, cfg.out_dir + "/model_d.json");
    }
    return p;
}

void cmd_scene_gen(const RunConfig& cfg) {
    write_manifest(cfg, cfg.out_dir);
    SyntheticScene synth = generate_synthetic_scene(config_scene_spec(cfg));
    save_scene(synth.scene, cfg.out_dir + "/scene.json");

    std::vector<Camera> views = canonical_views(cfg);
    for (size_t i = 0; i < views.size(); ++i) {
        RenderResult rr = render(synth.scene, views[i], cfg.render);
        write_ppm(rr.color, cfg.out_dir + "/preview_" + std::to_string(i) + ".ppm");
    }
    std::cout << "scene-gen: wrote " << synth.scene.gaussians.size() << " gaussians to "
              << cfg.out_dir << "/scene.json\n";
}

void cmd_fit(const RunConfig& cfg) {
    write_manifest(cfg, cfg.out_dir);
    Scene gt = generate_synthetic_scene(config_scene_spec(cfg)).scene;
    ViewpointSet candidates = config_candidates(cfg);
    Schedule schedule = config_schedule(cfg);

    TrainState state;
    state.scene = init_scene(cfg.bounds, cfg.model_init_gaussians, cfg.seed);
    state.rng_seed = cfg.seed;
    int n_views = std::min<int>(schedule.n_total, int(candidates.cameras.size()));
    for (int i = 0; i < n_views; ++i) {
        RenderResult rr = render(gt, candidates.cameras[size_t(i)], cfg.render);
        state.active_views.push_back({candidates.cameras[size_t(i)], std::move(rr.color)});
    }
    fit(state, cfg.optim, cfg.render, cfg.optim.total_iters);

    save_checkpoint(state.scene, state.iteration, cfg.seed, run_config_hash(cfg),
                    cfg.out_dir + "/fitted.json", cfg.out_dir + "/fitted.meta.json");

    std::vector<Camera> test_views = config_test_views(cfg);
    std::vector<Image> gt_images;
    for (const Camera& cam : test_views) gt_images.push_back(render(gt, cam, cfg.render).color);
    MetricReport report = evaluate_views(state.scene, test_views, gt_images, cfg.render);
    save_metric_report(report, cfg.out_dir + "/metrics.json");
    std::cout << "fit: " << n_views << " views, " << state.iteration
              << " iters, test PSNR avg " << report.psnr_avg << " dB\n";
}

void cmd_active_run(const RunConfig& cfg) {
    write_manifest(cfg, cfg.out_dir);
    Scene gt = generate_synthetic_scene(config_scene_spec(cfg)).scene;
    ViewpointSet candidates = config_candidates(cfg);
    std::vector<Camera> test_views = config_test_views(cfg);
    Predictor predictor = make_predictor(cfg, gt);

    ActiveLoopConfig lc = make_loop_config(cfg, cfg.out_dir + "/checkpoints");
    RunLog log = run_active_loop(gt, candidates, test_views, predictor, lc);

    save_run_log(log, cfg.out_dir + "/run_log.json");
    write_scores_csv(log, cfg.out_dir + "/scores.csv");
    write_selected_sequence(log, cfg.out_dir + "/selected_views.txt");
    save_metric_report(log.final_report, cfg.out_dir + "/metrics.json");

    std::vector<CurvePoint> curve;
    for (size_t i = 0; i < log.rounds.size(); ++i) {
        CurvePoint pt;
        pt.round = log.rounds[i].round;
        pt.iteration = log.rounds[i].iteration;
        pt.psnr_avg = log.rounds[i].psnr_avg;
        pt.psnr_worst5 = log.rounds[i].psnr_worst5;
        pt.ssim_avg = log.rounds[i].ssim_avg;
        pt.ssim_worst5 = log.rounds[i].ssim_worst5;
        curve.push_back(pt);
    }
    CurvePoint fin;
    fin.round = -1;
    fin.iteration = cfg.optim.total_iters;
    fin.psnr_avg = log.final_report.psnr_avg;
    fin.psnr_worst5 = log.final_report.psnr_worst5;
    fin.ssim_avg = log.final_report.ssim_avg;
    fin.ssim_worst5 = log.final_report.ssim_worst5;
    curve.push_back(fin);
    write_curve_csv(curve, cfg.out_dir + "/curve.csv");

    std::cout << "active-run(" << log.policy_name << "): final test PSNR avg "
              << log.final_report.psnr_avg << " dB, worst5 " << log.final_report.psnr_worst5
              << " dB\n";
}

void cmd_ablate(const RunConfig& cfg) {
    write_manifest(cfg, cfg.out_dir);
    const char* variants[4] = {"none", "no_depth_uq", "no_depth_blending", "depth_squared"};
    const char* row_names[4] = {"full", "no_depth_uq", "no_depth_blending", "depth_squared"};

    std::ofstream os(cfg.out_dir + "/ablation.csv", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + cfg.out_dir + "/ablation.csv");
    os << "variant,psnr_avg,psnr_worst5,ssim_avg,ssim_worst5\n";
    os.precision(17);

    for (int v = 0; v < 4; ++v) {
        double psnr_avg = 0, psnr_w = 0, ssim_avg = 0, ssim_w = 0;
        for (int s = 0; s < cfg.ablate_seeds; ++s) {
            RunConfig rc = cfg;
            rc.policy = "uq";
            rc.ablation = variants[v];
            rc.seed = cfg.seed + uint64_t(s);
            Scene gt = generate_synthetic_scene(config_scene_spec(rc)).scene;
            ViewpointSet candidates = config_candidates(rc);
            std::vector<Camera> test_views = config_test_views(rc);
            Predictor predictor = make_predictor(rc, gt);
            ActiveLoopConfig lc = make_loop_config(rc, "");
            RunLog log = run_active_loop(gt, candidates, test_views, predictor, lc);
            psnr_avg += log.final_report.psnr_avg;
            psnr_w += log.final_report.psnr_worst5;
            ssim_avg += log.final_report.ssim_avg;
            ssim_w += log.final_report.ssim_worst5;
            std::cout << "ablate " << row_names[v] << " seed " << rc.seed << ": PSNR "
                      << log.final_report.psnr_avg << " dB\n";
        }
        double n = double(cfg.ablate_seeds);
        os << row_names[v] << "," << psnr_avg / n << "," << psnr_w / n << "," << ssim_avg / n
           << "," << ssim_w / n << "\n";
    }
    std::cout << "ablate: wrote " << cfg.out_dir << "/ablation.csv\n";
}

void cmd_eval(const std::string& run_dir) {
    RunConfig cfg = load_run_config(run_dir + "/config.json");
    RunLog log = load_run_log(run_dir + "/run_log.json");

    Scene gt = generate_synthetic_scene(config_scene_spec(cfg)).scene;
    std::vector<Camera> test_views = config_test_views(cfg);
    if (test_views.empty()) throw std::runtime_error("cmd_eval: empty test set");
    std::vector<Image> gt_images;
    for (const Camera& cam : test_views) gt_images.push_back(render(gt, cam, cfg.render).color);

    for (const std::string& path : log.checkpoint_paths)
        if (path.empty())
            throw std::runtime_error("cmd_eval: run was logged without checkpoints");
    std::vector<CurvePoint> curve = per_step_curve(log.checkpoint_paths,
                                                   log.checkpoint_iterations, test_views,
                                                   gt_images, cfg.render);
    write_curve_csv(curve, run_dir + "/curve_recomputed.csv");

    MetricReport stored = load_metric_report(run_dir + "/metrics.json");
    const CurvePoint& fin = curve.back();
    double diff = std::max(std::abs(fin.psnr_avg - stored.psnr_avg),
                           std::abs(fin.ssim_avg - stored.ssim_avg));
    diff = std::max(diff, std::abs(fin.psnr_worst5 - stored.psnr_worst5));
    diff = std::max(diff, std::abs(fin.ssim_worst5 - stored.ssim_worst5));
    if (diff > 1e-9)
        throw std::runtime_error("cmd_eval: recomputed metrics differ from stored report by " +
                                 std::to_string(diff));
    std::cout << "eval: replayed " << curve.size() << " checkpoints, final PSNR avg "
              << fin.psnr_avg << " dB (matches stored report)\n";
}

void cmd_render(const RunConfig& cfg) {
    write_manifest(cfg, cfg.out_dir);
    Scene gt = generate_synthetic_scene(config_scene_spec(cfg)).scene;
    std::vector<Camera> views = canonical_views(cfg);
    for (size_t i = 0; i < views.size(); ++i) {
        RenderResult rr = render(gt, views[i], cfg.render);
        std::string stem = cfg.out_dir + "/render_" + std::to_string(i);
        write_ppm(rr.color, stem + ".ppm");
        write_float_raw(rr.color, stem + "_color.raw");
        write_float_raw(rr.depth, stem + "_depth.raw");
        write_float_raw(rr.alpha, stem + "_alpha.raw");
    }
    std::cout << "render: wrote 4 views to " << cfg.out_dir << "\n";
}

}  // namespace splatscan
