// Aggregates per-pixel uncertainty maps into scalar per-view scores:
// depth-aware blending, depth-uncertainty reweighting and the weighted total.
// Summation is row-major sequential so scores are bit-reproducible.
#pragma once

#include <string>

#include "splatscan/image.hpp"

namespace splatscan {

struct ScoreWeights {
    double lambda0 = 1.0;  // reweighted blending term
    double lambda1 = 0.1;  // render-uncertainty regularizer
    double lambda2 = 0.1;  // depth-uncertainty regularizer
};

enum class BlendMode { Linear, Squared };

struct ScoringConfig {
    // Depth is divided by depth_scale before blending so weight defaults are
    // portable across scene sizes; set normalize_depth=false for raw depth.
    bool normalize_depth = true;
    double depth_scale = 1.0;
    BlendMode mode = BlendMode::Linear;
};

// Linear: sum D * R; squared: sum D^2 * R. Throws on dimension mismatch or
// negative depth.
double blend(const Image& depth, const Image& r, BlendMode mode, const ScoringConfig& cfg);

// sum D * R * (1 - Du), with the same depth treatment as blend().
double blend_reweighted(const Image& depth, const Image& r, const Image& d_unc, BlendMode mode,
                        const ScoringConfig& cfg);

struct ViewScore {
    double l_blend = 0.0;
    double l_blend_star = 0.0;
    double sum_r = 0.0;
    double sum_d = 0.0;
    double total = 0.0;
    int view_id = -1;
};

// total = l_blend + lambda0 * l_blend_star + lambda1 * sum_r + lambda2 * sum_d,
// composed exactly in that order.
ViewScore total_score(const Image& depth, const Image& r, const Image& d_unc,
                      const ScoreWeights& w, const ScoringConfig& cfg);

// CSV row: round,view_id,l_blend,l_blend_star,sum_R,sum_D,total,selected_flag
std::string score_csv_header();
std::string score_csv_row(int round, const ViewScore& vs, bool selected);

}  // namespace splatscan
