#include "splatscan/scoring.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace splatscan {

namespace {

void check_maps(const Image& depth, const Image& r) {
    if (depth.width != r.width || depth.height != r.height)
        throw std::invalid_argument("scoring: map dimensions differ");
    if (depth.channels != 1 || r.channels != 1)
        throw std::invalid_argument("scoring: maps must be single-channel");
    for (double d : depth.data)
        if (d < 0.0) throw std::invalid_argument("scoring: negative depth");
}

}  // namespace

double blend(const Image& depth, const Image& r, BlendMode mode, const ScoringConfig& cfg) {
    check_maps(depth, r);
    const double inv = cfg.normalize_depth ? 1.0 / cfg.depth_scale : 1.0;
    double acc = 0.0;
    for (size_t i = 0; i < depth.data.size(); ++i) {
        double d = depth.data[i] * inv;
        acc += (mode == BlendMode::Squared ? d * d : d) * r.data[i];
    }
    return acc;
}

double blend_reweighted(const Image& depth, const Image& r, const Image& d_unc, BlendMode mode,
                        const ScoringConfig& cfg) {
    check_maps(depth, r);
    if (!d_unc.same_dims(r))
        throw std::invalid_argument("scoring: depth-uncertainty map dimensions differ");
    const double inv = cfg.normalize_depth ? 1.0 / cfg.depth_scale : 1.0;
    double acc = 0.0;
    for (size_t i = 0; i < depth.data.size(); ++i) {
        double d = depth.data[i] * inv;
        acc += (mode == BlendMode::Squared ? d * d : d) * r.data[i] * (1.0 - d_unc.data[i]);
    }
    return acc;
}

ViewScore total_score(const Image& depth, const Image& r, const Image& d_unc,
                      const ScoreWeights& w, const ScoringConfig& cfg) {
    ViewScore vs;
    vs.l_blend = blend(depth, r, cfg.mode, cfg);
    vs.l_blend_star = blend_reweighted(depth, r, d_unc, cfg.mode, cfg);
    for (double v : r.data) vs.sum_r += v;
    for (double v : d_unc.data) vs.sum_d += v;
    vs.total = vs.l_blend + w.lambda0 * vs.l_blend_star + w.lambda1 * vs.sum_r +
               w.lambda2 * vs.sum_d;
    return vs;
}

std::string score_csv_header() {
    return "round,view_id,l_blend,l_blend_star,sum_R,sum_D,total,selected_flag";
}

std::string score_csv_row(int round, const ViewScore& vs, bool selected) {
    std::ostringstream os;
    os.precision(17);
    os << round << "," << vs.view_id << "," << vs.l_blend << "," << vs.l_blend_star << ","
       << vs.sum_r << "," << vs.sum_d << "," << vs.total << "," << (selected ? 1 : 0);
    return os.str();
}

}  // namespace splatscan
