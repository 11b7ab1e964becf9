// Image-quality metrics and experiment aggregation: PSNR, scalar SSIM,
// average + worst-5% aggregates, per-round curves.
#pragma once

#include <string>
#include <vector>

#include "splatscan/image.hpp"
#include "splatscan/renderer.hpp"
#include "splatscan/types.hpp"

namespace splatscan {

// 10*log10(1/MSE) for images in [0,1]. Identical images yield +infinity;
// serialization writes the string "inf" for non-finite values.
double psnr(const Image& a, const Image& b);

// Mean of ssim_map over all pixels.
double ssim_scalar(const Image& a, const Image& b);

struct Aggregate {
    double avg = 0.0;
    double worst5 = 0.0;  // mean of the ceil(0.05*N) lowest values
};

// Throws on empty input. Higher-better metrics only.
Aggregate aggregate(const std::vector<double>& per_view);

struct MetricReport {
    std::vector<double> per_view_psnr;
    std::vector<double> per_view_ssim;
    double psnr_avg = 0.0, psnr_worst5 = 0.0;
    double ssim_avg = 0.0, ssim_worst5 = 0.0;
};

// Renders `scene` at each test view and scores against the ground-truth
// images (same order).
MetricReport evaluate_views(const Scene& scene, const std::vector<Camera>& test_views,
                            const std::vector<Image>& gt_images, const RenderConfig& cfg);

std::string metric_report_to_json(const MetricReport& r);
MetricReport metric_report_from_json(const std::string& text);
void save_metric_report(const MetricReport& r, const std::string& path);
MetricReport load_metric_report(const std::string& path);

struct CurvePoint {
    int round = 0;       // -1 marks the final point
    int iteration = 0;
    double psnr_avg = 0.0, psnr_worst5 = 0.0;
    double ssim_avg = 0.0, ssim_worst5 = 0.0;
};

// Recomputes the per-round curve from saved checkpoints (one scene JSON per
// round plus the final one). Throws if a checkpoint is missing or unreadable.
std::vector<CurvePoint> per_step_curve(const std::vector<std::string>& checkpoint_paths,
                                       const std::vector<int>& iterations,
                                       const std::vector<Camera>& test_views,
                                       const std::vector<Image>& gt_images,
                                       const RenderConfig& cfg);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

}  // namespace splatscan
