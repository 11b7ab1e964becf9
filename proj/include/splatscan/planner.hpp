// Active-loop orchestration: view-addition schedule, candidate scoring
// policies (including ablations and baselines), next-view and path selection,
// and the per-run log.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatscan/metrics.hpp"
#include "splatscan/optimizer.hpp"
#include "splatscan/rng.hpp"
#include "splatscan/scoring.hpp"
#include "splatscan/types.hpp"
#include "splatscan/uncertainty.hpp"

namespace splatscan {

struct Schedule {
    std::vector<int> add_iters;  // strictly increasing iteration indices
    int n_initial = 4;
    int n_total = 20;  // n_initial + add_iters.size()

    // The FisherRF cadence over 30000 iterations: 16 additions starting from
    // 4 views for a final set of 20.
    static Schedule paper_default();

    // paper_default rescaled by total_iters / 30000 (rounded, kept strictly
    // increasing and below total_iters).
    static Schedule rescaled(int total_iters);

    void check() const;  // throws on invariant violations
};

struct Policy {
    enum class Kind { Random, OracleSsim, Uq, UqAblation };
    enum class Ablation { None, NoDepthUq, NoDepthBlending, DepthSquared };

    Kind kind = Kind::Uq;
    Ablation ablation = Ablation::None;
    ScoreWeights weights;

    static Policy random() { return {Kind::Random, Ablation::None, {}}; }
    static Policy oracle_ssim() { return {Kind::OracleSsim, Ablation::None, {}}; }
    static Policy uq(const ScoreWeights& w) { return {Kind::Uq, Ablation::None, w}; }
    static Policy uq_ablation(Ablation a, const ScoreWeights& w) {
        return {a == Ablation::None ? Kind::Uq : Kind::UqAblation, a, w};
    }

    std::string name() const;
};

Policy::Ablation parse_ablation(const std::string& name);
std::string ablation_name(Policy::Ablation a);

struct RoundRecord {
    int round = 0;
    int iteration = 0;
    int selected_view = -1;
    std::vector<ViewScore> scores;  // empty for the random policy
    double psnr_avg = 0.0, psnr_worst5 = 0.0;
    double ssim_avg = 0.0, ssim_worst5 = 0.0;
};

struct RunLog {
    uint64_t seed = 0;
    std::string policy_name;
    std::string config_hash;
    std::vector<int> initial_views;
    std::vector<RoundRecord> rounds;
    std::vector<int> selected_sequence;  // additions only, in order
    MetricReport final_report;
    std::vector<int> checkpoint_iterations;     // per round plus final
    std::vector<std::string> checkpoint_paths;  // empty when not persisted
};

std::string run_log_to_json(const RunLog& log);
RunLog run_log_from_json(const std::string& text);
void save_run_log(const RunLog& log, const std::string& path);
RunLog load_run_log(const std::string& path);
void write_scores_csv(const RunLog& log, const std::string& path);
void write_selected_sequence(const RunLog& log, const std::string& path);

struct SelectionResult {
    int view_index = -1;
    std::vector<ViewScore> scores;
};

// Applies the ablation semantics to one candidate's maps. Exposed for tests.
ViewScore score_candidate_maps(const Image& depth, const Image& r, const Image& d_unc,
                               const Policy& policy, const ScoringConfig& cfg);

// Renders every unselected candidate from `model_scene`, scores it under the
// policy and returns the argmax (ties to the lowest view index). The random
// policy draws from `policy_rng` without rendering. gt_renders, when non-empty,
// must hold a ground-truth render per candidate (used by oracle scoring).
SelectionResult select_next_view(const Scene& model_scene, const ViewpointSet& candidates,
                                 const Policy& policy, const Predictor& predictor,
                                 const ScoringConfig& scoring, const RenderConfig& render_cfg,
                                 Rng& policy_rng,
                                 const std::vector<RenderResult>& gt_renders = {});

struct ActiveLoopConfig {
    Schedule schedule;
    Policy policy;
    OptimConfig optim;
    RenderConfig render;
    ScoringConfig scoring;
    int model_init_gaussians = 300;
    Vec3 init_bounds = Vec3::Ones();
    uint64_t seed = 0;
    bool initial_views_random = false;  // default: lowest-index candidates
    std::string checkpoint_dir;        // empty: keep checkpoints in memory only
    std::string config_hash;
};

// Full active reconstruction run: initial views, fit-to-schedule, one view
// added per schedule entry, test-set evaluation per round and at the end.
// Deterministic for a fixed config and seed.
RunLog run_active_loop(const Scene& gt_scene, const ViewpointSet& candidates,
                       const std::vector<Camera>& test_views, const Predictor& predictor,
                       const ActiveLoopConfig& cfg);

// Mean of the per-frame Eq.(5) totals along the path.
double score_path(const std::vector<Camera>& path, const Scene& model_scene,
                  const Predictor& predictor, const ScoreWeights& weights,
                  const ScoringConfig& scoring, const RenderConfig& render_cfg);

// Argmax of score_path, ties to the lowest index. Throws on empty input.
int select_path(const std::vector<std::vector<Camera>>& paths, const Scene& model_scene,
                const Predictor& predictor, const ScoreWeights& weights,
                const ScoringConfig& scoring, const RenderConfig& render_cfg);

}  // namespace splatscan
