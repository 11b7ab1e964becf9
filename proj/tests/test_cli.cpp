#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "splatscan/cli.hpp"

using namespace splatscan;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

RunConfig tiny_config(const std::string& out_dir, uint64_t seed = 3) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.out_dir = out_dir;
    cfg.width = 12;
    cfg.height = 12;
    cfg.layout = SceneLayout::BlobCluster;
    cfg.scene_gaussians = 20;
    cfg.candidate_count = 24;
    cfg.test_view_count = 3;
    cfg.optim.total_iters = 120;
    cfg.model_init_gaussians = 16;
    cfg.policy = "uq";
    cfg.predictor = "oracle";
    return cfg;
}

}  // namespace

TEST_CASE("config JSON round trip and key validation") {
    RunConfig cfg = tiny_config("x");
    cfg.weights = ScoreWeights{2.0, 0.25, 0.75};
    RunConfig back = run_config_from_json(run_config_to_json(cfg));
    CHECK(run_config_to_json(back) == run_config_to_json(cfg));
    CHECK(run_config_hash(back) == run_config_hash(cfg));
    CHECK(back.weights.lambda0 == 2.0);

    // Partial configs keep defaults for missing keys.
    RunConfig partial = run_config_from_json(R"({"seed": 9})");
    CHECK(partial.seed == 9);
    CHECK(partial.width == 64);

    CHECK_THROWS(run_config_from_json(R"({"policy": {"kind": "fisher"}})"));
    CHECK_THROWS(run_config_from_json(R"({"scene": {"layout": "mesh"}})"));
    CHECK_THROWS(run_config_from_json(R"({not json)"));
}

TEST_CASE("config hash is order-insensitive and content-sensitive") {
    RunConfig a = tiny_config("x");
    RunConfig b = tiny_config("x");
    CHECK(run_config_hash(a) == run_config_hash(b));
    b.seed += 1;
    CHECK(run_config_hash(a) != run_config_hash(b));
}

TEST_CASE("scene-gen writes a reloadable scene and stable previews") {
    std::string dir1 = test_helpers::temp_dir("scene_gen_1");
    std::string dir2 = test_helpers::temp_dir("scene_gen_2");
    RunConfig cfg = tiny_config(dir1);
    cmd_scene_gen(cfg);

    CHECK(fs::exists(dir1 + "/scene.json"));
    CHECK(fs::exists(dir1 + "/manifest.json"));
    for (int i = 0; i < 4; ++i) CHECK(fs::exists(dir1 + "/preview_" + std::to_string(i) + ".ppm"));

    Scene loaded = load_scene(dir1 + "/scene.json");
    Scene regenerated = generate_synthetic_scene(config_scene_spec(cfg)).scene;
    CHECK(scene_to_json(loaded) == scene_to_json(regenerated));

    cfg.out_dir = dir2;
    cmd_scene_gen(cfg);
    CHECK(slurp(dir1 + "/scene.json") == slurp(dir2 + "/scene.json"));
    for (int i = 0; i < 4; ++i)
        CHECK(slurp(dir1 + "/preview_" + std::to_string(i) + ".ppm") ==
              slurp(dir2 + "/preview_" + std::to_string(i) + ".ppm"));
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("active-run rerun reproduces sequence and score files byte-identically") {
    std::string dir1 = test_helpers::temp_dir("active_1");
    std::string dir2 = test_helpers::temp_dir("active_2");
    RunConfig cfg = tiny_config(dir1);
    cmd_active_run(cfg);
    cfg.out_dir = dir2;
    cmd_active_run(cfg);

    CHECK(slurp(dir1 + "/selected_views.txt") == slurp(dir2 + "/selected_views.txt"));
    CHECK(slurp(dir1 + "/scores.csv") == slurp(dir2 + "/scores.csv"));
    CHECK(fs::exists(dir1 + "/run_log.json"));
    CHECK(fs::exists(dir1 + "/curve.csv"));
    CHECK(fs::exists(dir1 + "/checkpoints/final.json"));
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("zero-weight uq selections equal the pure blend argmax") {
    RunConfig cfg = tiny_config("unused");
    Scene gt = generate_synthetic_scene(config_scene_spec(cfg)).scene;
    ViewpointSet cands = config_candidates(cfg);
    Scene model = init_scene(cfg.bounds, 12, 5);

    Predictor pred;
    pred.kind = PredictorKind::Oracle;
    pred.gt_scene = &gt;
    pred.features.depth_scale = config_scoring(cfg).depth_scale;

    Rng rng(1);
    ScoringConfig scfg = config_scoring(cfg);
    SelectionResult sel = select_next_view(model, cands, Policy::uq(ScoreWeights{0, 0, 0}), pred,
                                           scfg, cfg.render, rng);

    int best = -1;
    double best_blend = -1e300;
    for (size_t i = 0; i < cands.cameras.size(); ++i) {
        RenderResult rr = render(model, cands.cameras[i], cfg.render);
        auto [r_map, d_map] = pred.evaluate(rr, cands.cameras[i]);
        double b = blend(rr.depth, r_map, scfg.mode, scfg);
        if (b > best_blend) {
            best_blend = b;
            best = int(i);
        }
    }
    CHECK(sel.view_index == best);
}

TEST_CASE("ablate writes the four-variant table over shared seeds") {
    std::string dir = test_helpers::temp_dir("ablate");
    RunConfig cfg = tiny_config(dir, 8);
    cfg.ablate_seeds = 2;
    cmd_ablate(cfg);

    std::string csv = slurp(dir + "/ablation.csv");
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    CHECK(line == "variant,psnr_avg,psnr_worst5,ssim_avg,ssim_worst5");
    std::vector<std::string> rows;
    while (std::getline(is, line))
        if (!line.empty()) rows.push_back(line);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].rfind("full,", 0) == 0);
    CHECK(rows[1].rfind("no_depth_uq,", 0) == 0);
    CHECK(rows[2].rfind("no_depth_blending,", 0) == 0);
    CHECK(rows[3].rfind("depth_squared,", 0) == 0);
    for (const auto& row : rows)
        CHECK(std::count(row.begin(), row.end(), ',') == 4);  // 4 metric columns
    fs::remove_all(dir);
}

TEST_CASE("shared seeds give identical initial views across policies") {
    RunConfig cfg = tiny_config("unused", 12);
    Scene gt = generate_synthetic_scene(config_scene_spec(cfg)).scene;
    ViewpointSet cands = config_candidates(cfg);
    std::vector<Camera> tests = config_test_views(cfg);

    std::vector<std::vector<int>> initials;
    for (const char* ablation : {"none", "no_depth_blending"}) {
        RunConfig rc = cfg;
        rc.ablation = ablation;
        Predictor pred = make_predictor(rc, gt);
        ActiveLoopConfig lc;
        lc.schedule = config_schedule(rc);
        lc.policy = config_policy(rc);
        lc.optim = rc.optim;
        lc.render = rc.render;
        lc.scoring = config_scoring(rc);
        lc.model_init_gaussians = rc.model_init_gaussians;
        lc.init_bounds = rc.bounds;
        lc.seed = rc.seed;
        RunLog log = run_active_loop(gt, cands, tests, pred, lc);
        initials.push_back(log.initial_views);
    }
    CHECK(initials[0] == initials[1]);
}

TEST_CASE("eval replays a finished run and validates stored metrics") {
    std::string dir = test_helpers::temp_dir("eval_run");
    RunConfig cfg = tiny_config(dir, 21);
    cmd_active_run(cfg);
    cmd_eval(dir);  // throws on mismatch
    CHECK(fs::exists(dir + "/curve_recomputed.csv"));

    // Corrupting a checkpoint must fail with the file named.
    std::string victim = dir + "/checkpoints/final.json";
    {
        std::ofstream os(victim, std::ios::binary);
        os << "{broken";
    }
    try {
        cmd_eval(dir);
        FAIL("expected an exception");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("final.json") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("eval of a missing run directory fails") {
    CHECK_THROWS(cmd_eval("/nonexistent/run/dir"));
}

TEST_CASE("empty test set is rejected at config level") {
    RunConfig cfg = tiny_config("x");
    std::string json = run_config_to_json(cfg);
    auto pos = json.find("\"count\": 3");
    REQUIRE(pos != std::string::npos);
    json.replace(pos, 10, "\"count\": 0");
    CHECK_THROWS(run_config_from_json(json));
}

TEST_CASE("render command writes both image formats") {
    std::string dir = test_helpers::temp_dir("render_cmd");
    RunConfig cfg = tiny_config(dir);
    cmd_render(cfg);
    for (int i = 0; i < 4; ++i) {
        std::string stem = dir + "/render_" + std::to_string(i);
        CHECK(fs::exists(stem + ".ppm"));
        Image color = read_float_raw(stem + "_color.raw");
        CHECK(color.width == 12);
        CHECK(color.channels == 3);
        Image depth = read_float_raw(stem + "_depth.raw");
        CHECK(depth.channels == 1);
    }
    fs::remove_all(dir);
}

TEST_CASE("float raw dump round trips bit-exactly at float32 precision") {
    Rng rng(2);
    Image img = test_helpers::random_image(rng, 7, 5, 3);
    std::string dir = test_helpers::temp_dir("raw_io");
    write_float_raw(img, dir + "/img.raw");
    Image back = read_float_raw(dir + "/img.raw");
    REQUIRE(back.same_dims(img));
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(float(img.data[i]) == float(back.data[i]));
    fs::remove_all(dir);
}
