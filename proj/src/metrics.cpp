#include "splatscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <stdexcept>

#include "splatscan/ssim.hpp"

namespace splatscan {

using nlohmann::json;

double psnr(const Image& a, const Image& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("psnr: image dimensions differ");
    double se = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        se += d * d;
    }
    double mse = se / double(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim_scalar(const Image& a, const Image& b) { return ssim_mean(a, b); }

Aggregate aggregate(const std::vector<double>& per_view) {
    if (per_view.empty()) throw std::invalid_argument("aggregate: empty input");
    Aggregate agg;
    for (double v : per_view) agg.avg += v;
    agg.avg /= double(per_view.size());

    size_t k = size_t(std::ceil(0.05 * double(per_view.size())));
    std::vector<double> sorted = per_view;
    std::sort(sorted.begin(), sorted.end());
    double acc = 0.0;
    for (size_t i = 0; i < k; ++i) acc += sorted[i];
    agg.worst5 = acc / double(k);
    return agg;
}

MetricReport evaluate_views(const Scene& scene, const std::vector<Camera>& test_views,
                            const std::vector<Image>& gt_images, const RenderConfig& cfg) {
    if (test_views.size() != gt_images.size())
        throw std::invalid_argument("evaluate_views: view/image count mismatch");
    if (test_views.empty()) throw std::invalid_argument("evaluate_views: empty test set");
    MetricReport r;
    for (size_t i = 0; i < test_views.size(); ++i) {
        RenderResult rr = render(scene, test_views[i], cfg);
        r.per_view_psnr.push_back(psnr(rr.color, gt_images[i]));
        r.per_view_ssim.push_back(ssim_scalar(rr.color, gt_images[i]));
    }
    Aggregate ap = aggregate(r.per_view_psnr);
    Aggregate as = aggregate(r.per_view_ssim);
    r.psnr_avg = ap.avg;
    r.psnr_worst5 = ap.worst5;
    r.ssim_avg = as.avg;
    r.ssim_worst5 = as.worst5;
    return r;
}

namespace {

json num_or_inf(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : "-inf";
}

double parse_num_or_inf(const json& j) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw std::runtime_error("metric JSON: bad numeric string '" + s + "'");
    }
    return j.get<double>();
}

json metric_list(const std::vector<double>& vs) {
    json arr = json::array();
    for (double v : vs) arr.push_back(num_or_inf(v));
    return arr;
}

std::vector<double> parse_metric_list(const json& arr) {
    std::vector<double> vs;
    for (const auto& j : arr) vs.push_back(parse_num_or_inf(j));
    return vs;
}

}  // namespace

std::string metric_report_to_json(const MetricReport& r) {
    json j{{"per_view_psnr", metric_list(r.per_view_psnr)},
           {"per_view_ssim", metric_list(r.per_view_ssim)},
           {"psnr_avg", num_or_inf(r.psnr_avg)},
           {"psnr_worst5", num_or_inf(r.psnr_worst5)},
           {"ssim_avg", num_or_inf(r.ssim_avg)},
           {"ssim_worst5", num_or_inf(r.ssim_worst5)}};
    return j.dump(2);
}

MetricReport metric_report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("metric report parse error: ") + e.what());
    }
    MetricReport r;
    r.per_view_psnr = parse_metric_list(j.at("per_view_psnr"));
    r.per_view_ssim = parse_metric_list(j.at("per_view_ssim"));
    r.psnr_avg = parse_num_or_inf(j.at("psnr_avg"));
    r.psnr_worst5 = parse_num_or_inf(j.at("psnr_worst5"));
    r.ssim_avg = parse_num_or_inf(j.at("ssim_avg"));
    r.ssim_worst5 = parse_num_or_inf(j.at("ssim_worst5"));
    return r;
}

void save_metric_report(const MetricReport& r, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_metric_report: cannot open " + path);
    os << metric_report_to_json(r);
}

MetricReport load_metric_report(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_metric_report: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return metric_report_from_json(text);
}

std::vector<CurvePoint> per_step_curve(const std::vector<std::string>& checkpoint_paths,
                                       const std::vector<int>& iterations,
                                       const std::vector<Camera>& test_views,
                                       const std::vector<Image>& gt_images,
                                       const RenderConfig& cfg) {
    if (checkpoint_paths.size() != iterations.size())
        throw std::invalid_argument("per_step_curve: path/iteration count mismatch");
    std::vector<CurvePoint> curve;
    for (size_t i = 0; i < checkpoint_paths.size(); ++i) {
        Scene scene = load_scene(checkpoint_paths[i]);
        MetricReport r = evaluate_views(scene, test_views, gt_images, cfg);
        CurvePoint pt;
        pt.round = (i + 1 == checkpoint_paths.size()) ? -1 : int(i);
        pt.iteration = iterations[i];
        pt.psnr_avg = r.psnr_avg;
        pt.psnr_worst5 = r.psnr_worst5;
        pt.ssim_avg = r.ssim_avg;
        pt.ssim_worst5 = r.ssim_worst5;
        curve.push_back(pt);
    }
    return curve;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_curve_csv: cannot open " + path);
    os << "round,iteration,psnr_avg,psnr_worst5,ssim_avg,ssim_worst5\n";
    os.precision(17);
    for (const auto& pt : curve)
        os << pt.round << "," << pt.iteration << "," << pt.psnr_avg << "," << pt.psnr_worst5
           << "," << pt.ssim_avg << "," << pt.ssim_worst5 << "\n";
}

}  // namespace splatscan
