#include "splatscan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "splatscan/rng.hpp"

namespace splatscan {

using nlohmann::json;

Schedule Schedule::paper_default() {
    Schedule s;
    s.add_iters = {400,  900,  1500, 2200,  3000,  3900,  4900,  6000,
                   7200, 8500, 9900, 11400, 13000, 14700, 16500, 18400};
    s.n_initial = 4;
    s.n_total = 20;
    return s;
}

Schedule Schedule::rescaled(int total_iters) {
    Schedule s = paper_default();
    if (total_iters == 30000) return s;
    if (total_iters < 1) throw std::invalid_argument("Schedule::rescaled: total_iters >= 1");
    double f = double(total_iters) / 30000.0;
    int prev = 0;
    for (int& it : s.add_iters) {
        int v = int(std::lround(it * f));
        v = std::max(v, prev + 1);  // keep strictly increasing
        v = std::min(v, total_iters - 1);
        it = v;
        prev = v;
    }
    // Clamping at the top can collapse entries; push duplicates back down.
    for (size_t i = s.add_iters.size(); i-- > 1;) {
        if (s.add_iters[i - 1] >= s.add_iters[i])
            s.add_iters[i - 1] = s.add_iters[i] - 1;
    }
    if (s.add_iters.front() < 1)
        throw std::invalid_argument("Schedule::rescaled: total_iters too small for 16 additions");
    return s;
}

void Schedule::check() const {
    for (size_t i = 1; i < add_iters.size(); ++i)
        if (add_iters[i] <= add_iters[i - 1])
            throw std::invalid_argument("Schedule: add_iters must be strictly increasing");
    if (n_initial < 1) throw std::invalid_argument("Schedule: n_initial >= 1");
    if (n_total != n_initial + int(add_iters.size()))
        throw std::invalid_argument("Schedule: n_total must equal n_initial + |add_iters|");
}

std::string Policy::name() const {
    switch (kind) {
        case Kind::Random: return "random";
        case Kind::OracleSsim: return "oracle_ssim";
        case Kind::Uq: return "uq";
        case Kind::UqAblation: return "uq_" + ablation_name(ablation);
    }
    return "?";
}

Policy::Ablation parse_ablation(const std::string& name) {
    if (name == "none") return Policy::Ablation::None;
    if (name == "no_depth_uq") return Policy::Ablation::NoDepthUq;
    if (name == "no_depth_blending") return Policy::Ablation::NoDepthBlending;
    if (name == "depth_squared") return Policy::Ablation::DepthSquared;
    throw std::invalid_argument("unknown ablation variant: '" + name + "'");
}

std::string ablation_name(Policy::Ablation a) {
    switch (a) {
        case Policy::Ablation::None: return "none";
        case Policy::Ablation::NoDepthUq: return "no_depth_uq";
        case Policy::Ablation::NoDepthBlending: return "no_depth_blending";
        case Policy::Ablation::DepthSquared: return "depth_squared";
    }
    return "?";
}

ViewScore score_candidate_maps(const Image& depth, const Image& r, const Image& d_unc,
                               const Policy& policy, const ScoringConfig& cfg) {
    switch (policy.ablation) {
        case Policy::Ablation::None:
            return total_score(depth, r, d_unc, policy.weights, cfg);
        case Policy::Ablation::NoDepthUq: {
            Image zero(d_unc.width, d_unc.height, 1);
            ViewScore vs = total_score(depth, r, zero, policy.weights, cfg);
            // Keep sum_d at zero: the variant ignores the depth branch entirely.
            return vs;
        }
        case Policy::Ablation::NoDepthBlending: {
            ViewScore vs;
            for (double v : r.data) vs.sum_r += v;
            for (double v : d_unc.data) vs.sum_d += v;
            double l1 = policy.weights.lambda1 > 0.0 ? policy.weights.lambda1 : 1.0;
            vs.total = l1 * vs.sum_r + policy.weights.lambda2 * vs.sum_d;
            return vs;
        }
        case Policy::Ablation::DepthSquared: {
            ScoringConfig sq = cfg;
            sq.mode = BlendMode::Squared;
            return total_score(depth, r, d_unc, policy.weights, sq);
        }
    }
    throw std::logic_error("unreachable ablation");
}

SelectionResult select_next_view(const Scene& model_scene, const ViewpointSet& candidates,
                                 const Policy& policy, const Predictor& predictor,
                                 const ScoringConfig& scoring, const RenderConfig& render_cfg,
                                 Rng& policy_rng, const std::vector<RenderResult>& gt_renders) {
    std::vector<int> open;
    for (size_t i = 0; i < candidates.cameras.size(); ++i)
        if (!candidates.selected_mask[i]) open.push_back(int(i));
    if (open.empty()) throw std::runtime_error("select_next_view: all candidates already selected");

    SelectionResult result;
    if (policy.kind == Policy::Kind::Random) {
        result.view_index = open[policy_rng.uniform_int(open.size())];
        return result;
    }

    double best = -std::numeric_limits<double>::infinity();
    for (int vi : open) {
        const Camera& cam = candidates.cameras[size_t(vi)];
        RenderResult rr = render(model_scene, cam, render_cfg);
        const RenderResult* gt_rr =
            gt_renders.empty() ? nullptr : &gt_renders.at(size_t(vi));

        ViewScore vs;
        if (policy.kind == Policy::Kind::OracleSsim) {
            // Mean oracle uncertainty against the ground-truth render.
            if (!predictor.gt_scene)
                throw std::logic_error("oracle_ssim policy needs a ground-truth scene");
            RenderResult local;
            if (!gt_rr) {
                local = render(*predictor.gt_scene, cam, render_cfg);
                gt_rr = &local;
            }
            UncertaintyMap u = oracle_uncertainty(rr.color, gt_rr->color);
            for (double v : u.data) vs.sum_r += v;
            vs.total = vs.sum_r / double(u.data.size());
        } else {
            auto [r_map, d_map] = predictor.evaluate(rr, cam, gt_rr);
            vs = score_candidate_maps(rr.depth, r_map, d_map, policy, scoring);
        }
        vs.view_id = vi;
        result.scores.push_back(vs);
        if (vs.total > best) {  // strict: ties keep the lowest index
            best = vs.total;
            result.view_index = vi;
        }
    }
    return result;
}

namespace {

std::vector<int> pick_initial_views(const ViewpointSet& candidates, const Schedule& schedule,
                                    bool random_mode, uint64_t seed) {
    int n = schedule.n_initial;
    if (int(candidates.cameras.size()) < schedule.n_total)
        throw std::invalid_argument("run_active_loop: fewer candidates than n_total");
    std::vector<int> views;
    if (!random_mode) {
        for (int i = 0; i < n; ++i) views.push_back(i);
        return views;
    }
    Rng rng = substream(seed, "initial-views");
    std::vector<int> pool(candidates.cameras.size());
    for (size_t i = 0; i < pool.size(); ++i) pool[i] = int(i);
    for (int i = 0; i < n; ++i) {
        size_t j = i + rng.uniform_int(pool.size() - i);
        std::swap(pool[size_t(i)], pool[j]);
        views.push_back(pool[size_t(i)]);
    }
    std::sort(views.begin(), views.end());
    return views;
}

}  // namespace

RunLog run_active_loop(const Scene& gt_scene, const ViewpointSet& candidates,
                       const std::vector<Camera>& test_views, const Predictor& predictor,
                       const ActiveLoopConfig& cfg) {
    cfg.schedule.check();
    if (!cfg.schedule.add_iters.empty() &&
        cfg.schedule.add_iters.back() >= cfg.optim.total_iters)
        throw std::invalid_argument("run_active_loop: schedule extends past total_iters");

    const bool needs_gt_renders =
        cfg.policy.kind == Policy::Kind::OracleSsim ||
        (cfg.policy.kind != Policy::Kind::Random && predictor.kind == PredictorKind::Oracle);

    // The ground truth is static: render candidate and test views once.
    std::vector<RenderResult> gt_candidate_renders;
    if (needs_gt_renders)
        for (const Camera& cam : candidates.cameras)
            gt_candidate_renders.push_back(render(gt_scene, cam, cfg.render));

    std::vector<Image> gt_test_images;
    for (const Camera& cam : test_views)
        gt_test_images.push_back(render(gt_scene, cam, cfg.render).color);

    RunLog log;
    log.seed = cfg.seed;
    log.policy_name = cfg.policy.name();
    log.config_hash = cfg.config_hash;

    ViewpointSet cands = candidates;
    TrainState state;
    state.scene = init_scene(cfg.init_bounds, cfg.model_init_gaussians, cfg.seed);
    state.rng_seed = cfg.seed;

    auto capture = [&](int view_index) {
        const Camera& cam = cands.cameras.at(size_t(view_index));
        RenderResult rr = render(gt_scene, cam, cfg.render);
        state.active_views.push_back({cam, std::move(rr.color)});
        cands.selected_mask.at(size_t(view_index)) = true;
    };

    log.initial_views =
        pick_initial_views(cands, cfg.schedule, cfg.initial_views_random, cfg.seed);
    for (int vi : log.initial_views) capture(vi);

    namespace fs = std::filesystem;
    if (!cfg.checkpoint_dir.empty()) fs::create_directories(cfg.checkpoint_dir);
    auto checkpoint = [&](const std::string& stem) {
        if (cfg.checkpoint_dir.empty()) return std::string();
        std::string scene_path = cfg.checkpoint_dir + "/" + stem + ".json";
        save_checkpoint(state.scene, state.iteration, cfg.seed, cfg.config_hash, scene_path,
                        cfg.checkpoint_dir + "/" + stem + ".meta.json");
        return scene_path;
    };

    Rng policy_rng = substream(cfg.seed, "policy");
    for (size_t round = 0; round < cfg.schedule.add_iters.size(); ++round) {
        fit(state, cfg.optim, cfg.render, cfg.schedule.add_iters[round]);

        SelectionResult sel;
        try {
            sel = select_next_view(state.scene, cands, cfg.policy, predictor, cfg.scoring,
                                   cfg.render, policy_rng, gt_candidate_renders);
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(round) + ": " + e.what());
        }
        capture(sel.view_index);
        log.selected_sequence.push_back(sel.view_index);

        RoundRecord rec;
        rec.round = int(round);
        rec.iteration = state.iteration;
        rec.selected_view = sel.view_index;
        rec.scores = std::move(sel.scores);
        MetricReport mr = evaluate_views(state.scene, test_views, gt_test_images, cfg.render);
        rec.psnr_avg = mr.psnr_avg;
        rec.psnr_worst5 = mr.psnr_worst5;
        rec.ssim_avg = mr.ssim_avg;
        rec.ssim_worst5 = mr.ssim_worst5;
        log.rounds.push_back(std::move(rec));
        log.checkpoint_iterations.push_back(state.iteration);
        log.checkpoint_paths.push_back(checkpoint("round_" + std::to_string(round)));
    }

    fit(state, cfg.optim, cfg.render, cfg.optim.total_iters);
    log.final_report = evaluate_views(state.scene, test_views, gt_test_images, cfg.render);
    log.checkpoint_iterations.push_back(state.iteration);
    log.checkpoint_paths.push_back(checkpoint("final"));
    return log;
}

double score_path(const std::vector<Camera>& path, const Scene& model_scene,
                  const Predictor& predictor, const ScoreWeights& weights,
                  const ScoringConfig& scoring, const RenderConfig& render_cfg) {
    if (path.empty()) throw std::invalid_argument("score_path: empty path");
    double acc = 0.0;
    for (const Camera& cam : path) {
        RenderResult rr = render(model_scene, cam, render_cfg);
        auto [r_map, d_map] = predictor.evaluate(rr, cam);
        acc += total_score(rr.depth, r_map, d_map, weights, scoring).total;
    }
    return acc / double(path.size());
}

int select_path(const std::vector<std::vector<Camera>>& paths, const Scene& model_scene,
                const Predictor& predictor, const ScoreWeights& weights,
                const ScoringConfig& scoring, const RenderConfig& render_cfg) {
    if (paths.empty()) throw std::invalid_argument("select_path: empty path list");
    int best_index = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < paths.size(); ++i) {
        double s = score_path(paths[i], model_scene, predictor, weights, scoring, render_cfg);
        if (s > best) {
            best = s;
            best_index = int(i);
        }
    }
    return best_index;
}

namespace {

json view_score_to_json(const ViewScore& vs) {
    return json{{"view_id", vs.view_id},   {"l_blend", vs.l_blend},
                {"l_blend_star", vs.l_blend_star}, {"sum_R", vs.sum_r},
                {"sum_D", vs.sum_d},       {"total", vs.total}};
}

ViewScore view_score_from_json(const json& j) {
    ViewScore vs;
    vs.view_id = j.at("view_id").get<int>();
    vs.l_blend = j.at("l_blend").get<double>();
    vs.l_blend_star = j.at("l_blend_star").get<double>();
    vs.sum_r = j.at("sum_R").get<double>();
    vs.sum_d = j.at("sum_D").get<double>();
    vs.total = j.at("total").get<double>();
    return vs;
}

}  // namespace

std::string run_log_to_json(const RunLog& log) {
    json rounds = json::array();
    for (const auto& rec : log.rounds) {
        json scores = json::array();
        for (const auto& vs : rec.scores) scores.push_back(view_score_to_json(vs));
        rounds.push_back(json{{"round", rec.round},
                              {"iteration", rec.iteration},
                              {"selected_view", rec.selected_view},
                              {"scores", scores},
                              {"psnr_avg", rec.psnr_avg},
                              {"psnr_worst5", rec.psnr_worst5},
                              {"ssim_avg", rec.ssim_avg},
                              {"ssim_worst5", rec.ssim_worst5}});
    }
    json j{{"seed", log.seed},
           {"policy", log.policy_name},
           {"config_hash", log.config_hash},
           {"initial_views", log.initial_views},
           {"rounds", rounds},
           {"selected_sequence", log.selected_sequence},
           {"final_report", json::parse(metric_report_to_json(log.final_report))},
           {"checkpoint_iterations", log.checkpoint_iterations},
           {"checkpoint_paths", log.checkpoint_paths}};
    return j.dump(2);
}

RunLog run_log_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("run log parse error: ") + e.what());
    }
    RunLog log;
    log.seed = j.at("seed").get<uint64_t>();
    log.policy_name = j.at("policy").get<std::string>();
    log.config_hash = j.at("config_hash").get<std::string>();
    log.initial_views = j.at("initial_views").get<std::vector<int>>();
    for (const auto& jr : j.at("rounds")) {
        RoundRecord rec;
        rec.round = jr.at("round").get<int>();
        rec.iteration = jr.at("iteration").get<int>();
        rec.selected_view = jr.at("selected_view").get<int>();
        for (const auto& js : jr.at("scores")) rec.scores.push_back(view_score_from_json(js));
        rec.psnr_avg = jr.at("psnr_avg").get<double>();
        rec.psnr_worst5 = jr.at("psnr_worst5").get<double>();
        rec.ssim_avg = jr.at("ssim_avg").get<double>();
        rec.ssim_worst5 = jr.at("ssim_worst5").get<double>();
        log.rounds.push_back(std::move(rec));
    }
    log.selected_sequence = j.at("selected_sequence").get<std::vector<int>>();
    log.final_report = metric_report_from_json(j.at("final_report").dump());
    log.checkpoint_iterations = j.at("checkpoint_iterations").get<std::vector<int>>();
    log.checkpoint_paths = j.at("checkpoint_paths").get<std::vector<std::string>>();
    return log;
}

void save_run_log(const RunLog& log, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_run_log: cannot open " + path);
    os << run_log_to_json(log);
}

RunLog load_run_log(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_run_log: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return run_log_from_json(text);
}

void write_scores_csv(const RunLog& log, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_scores_csv: cannot open " + path);
    os << score_csv_header() << "\n";
    for (const auto& rec : log.rounds)
        for (const auto& vs : rec.scores)
            os << score_csv_row(rec.round, vs, vs.view_id == rec.selected_view) << "\n";
}

void write_selected_sequence(const RunLog& log, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_selected_sequence: cannot open " + path);
    for (int v : log.selected_sequence) os << v << "\n";
}

}  // namespace splatscan
