#include "splatscan/ssim.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace splatscan {

namespace {

constexpr int kRadius = 5;  // 11x11 window
constexpr double kSigma = 1.5;

const std::array<double, 2 * kRadius + 1>& window_1d() {
    static const auto w = [] {
        std::array<double, 2 * kRadius + 1> g{};
        double sum = 0.0;
        for (int i = -kRadius; i <= kRadius; ++i) {
            g[size_t(i + kRadius)] = std::exp(-double(i * i) / (2.0 * kSigma * kSigma));
            sum += g[size_t(i + kRadius)];
        }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return w;
}

void check_dims(const Image& a, const Image& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("ssim: image dimensions differ");
    if (a.width < 1 || a.height < 1) throw std::invalid_argument("ssim: empty image");
}

using Plane = std::vector<double>;

// Raw separable convolution over valid pixels (no padding). The clipped window
// at a border is always a rectangle, so the 2D weight sum factorises into
// border_weights(x) * border_weights(y) and renormalization can be applied
// after the two 1D passes.
void conv_raw(const Plane& src, int W, int H, Plane& tmp, Plane& dst) {
    const auto& g = window_1d();
    tmp.assign(size_t(W) * H, 0.0);
    dst.assign(size_t(W) * H, 0.0);
    for (int y = 0; y < H; ++y) {
        const double* row = src.data() + size_t(y) * W;
        double* out = tmp.data() + size_t(y) * W;
        for (int x = 0; x < W; ++x) {
            int d0 = std::max(-kRadius, -x), d1 = std::min(kRadius, W - 1 - x);
            double acc = 0.0;
            for (int d = d0; d <= d1; ++d) acc += g[size_t(d + kRadius)] * row[x + d];
            out[x] = acc;
        }
    }
    for (int y = 0; y < H; ++y) {
        int d0 = std::max(-kRadius, -y), d1 = std::min(kRadius, H - 1 - y);
        double* out = dst.data() + size_t(y) * W;
        for (int d = d0; d <= d1; ++d) {
            const double* row = tmp.data() + size_t(y + d) * W;
            double w = g[size_t(d + kRadius)];
            for (int x = 0; x < W; ++x) out[x] += w * row[x];
        }
    }
}

std::vector<double> border_weights(int n) {
    const auto& g = window_1d();
    std::vector<double> w(size_t(n), 0.0);
    for (int x = 0; x < n; ++x) {
        int d0 = std::max(-kRadius, -x), d1 = std::min(kRadius, n - 1 - x);
        for (int d = d0; d <= d1; ++d) w[size_t(x)] += g[size_t(d + kRadius)];
    }
    return w;
}

// Normalized windowed moments of one channel pair.
struct Moments {
    Plane mu_a, mu_b, e_aa, e_bb, e_ab;
};

void channel_planes(const Image& img, int c, Plane& out) {
    out.resize(img.pixel_count());
    const int W = img.width, H = img.height;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) out[size_t(y) * W + x] = img.at(x, y, c);
}

void compute_moments(const Image& a, const Image& b, int c, Moments& m) {
    const int W = a.width, H = a.height;
    const size_t n = a.pixel_count();
    static thread_local Plane pa, pb, prod, tmp;
    channel_planes(a, c, pa);
    channel_planes(b, c, pb);

    conv_raw(pa, W, H, tmp, m.mu_a);
    conv_raw(pb, W, H, tmp, m.mu_b);
    prod.resize(n);
    for (size_t i = 0; i < n; ++i) prod[i] = pa[i] * pa[i];
    conv_raw(prod, W, H, tmp, m.e_aa);
    for (size_t i = 0; i < n; ++i) prod[i] = pb[i] * pb[i];
    conv_raw(prod, W, H, tmp, m.e_bb);
    for (size_t i = 0; i < n; ++i) prod[i] = pa[i] * pb[i];
    conv_raw(prod, W, H, tmp, m.e_ab);

    std::vector<double> wx = border_weights(W), wy = border_weights(H);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            size_t i = size_t(y) * W + x;
            double inv = 1.0 / (wx[size_t(x)] * wy[size_t(y)]);
            m.mu_a[i] *= inv;
            m.mu_b[i] *= inv;
            m.e_aa[i] *= inv;
            m.e_bb[i] *= inv;
            m.e_ab[i] *= inv;
        }
    }
}

inline double ssim_at(const Moments& m, size_t i, double* a1o = nullptr, double* a2o = nullptr,
                      double* b1o = nullptr, double* b2o = nullptr) {
    double mu_a = m.mu_a[i], mu_b = m.mu_b[i];
    double var_a = m.e_aa[i] - mu_a * mu_a;
    double var_b = m.e_bb[i] - mu_b * mu_b;
    double cov = m.e_ab[i] - mu_a * mu_b;
    double a1 = 2.0 * mu_a * mu_b + kSsimC1;
    double a2 = 2.0 * cov + kSsimC2;
    double b1 = mu_a * mu_a + mu_b * mu_b + kSsimC1;
    double b2 = var_a + var_b + kSsimC2;
    if (a1o) *a1o = a1;
    if (a2o) *a2o = a2;
    if (b1o) *b1o = b1;
    if (b2o) *b2o = b2;
    return (a1 * a2) / (b1 * b2);
}

}  // namespace

Image ssim_map(const Image& a, const Image& b) {
    check_dims(a, b);
    Image map(a.width, a.height, 1);
    Moments m;
    for (int c = 0; c < a.channels; ++c) {
        compute_moments(a, b, c, m);
        for (size_t i = 0; i < map.data.size(); ++i) map.data[i] += ssim_at(m, i);
    }
    for (double& v : map.data) v /= a.channels;
    return map;
}

double ssim_mean(const Image& a, const Image& b) {
    Image map = ssim_map(a, b);
    double acc = 0.0;
    for (double v : map.data) acc += v;
    return acc / double(map.data.size());
}

Image ssim_mean_backward(const Image& a, const Image& b, double upstream) {
    Image grad(a.width, a.height, a.channels);
    ssim_mean_and_backward(a, b, upstream, grad);
    return grad;
}

double ssim_mean_and_backward(const Image& a, const Image& b, double upstream, Image& grad_out) {
    check_dims(a, b);
    const int W = a.width, H = a.height;
    const size_t n = a.pixel_count();
    const double scale = upstream / (double(n) * a.channels);
    std::vector<double> wx = border_weights(W), wy = border_weights(H);

    Image& grad = grad_out;
    grad = Image(W, H, a.channels);
    double mean_acc = 0.0;
    Moments m;
    Plane d_mu(n), d_var(n), d_cov(n), tmp, conv_mu, conv_var, conv_cov, pa, pb;
    for (int c = 0; c < a.channels; ++c) {
        compute_moments(a, b, c, m);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                size_t i = size_t(y) * W + x;
                double a1, a2, b1, b2;
                double ssim = ssim_at(m, i, &a1, &a2, &b1, &b2);
                mean_acc += ssim;
                double mu_a = m.mu_a[i], mu_b = m.mu_b[i];

                double ds_dmu = (2.0 * mu_b * a2) / (b1 * b2) - ssim * 2.0 * mu_a / b1;
                double ds_dvar = -ssim / b2;
                double ds_dcov = 2.0 * a1 / (b1 * b2);

                // Fold the mu_a chains of var_a = E[a^2]-mu_a^2 and
                // cov = E[ab]-mu_a mu_b into the mu term; pre-divide by the
                // window weight sum so the scatter is a raw convolution.
                double inv = scale / (wx[size_t(x)] * wy[size_t(y)]);
                d_mu[i] = inv * (ds_dmu - 2.0 * mu_a * ds_dvar - mu_b * ds_dcov);
                d_var[i] = inv * ds_dvar;
                d_cov[i] = inv * ds_dcov;
            }
        }
        // Adjoint of the raw conv is the same conv (symmetric kernel).
        conv_raw(d_mu, W, H, tmp, conv_mu);
        conv_raw(d_var, W, H, tmp, conv_var);
        conv_raw(d_cov, W, H, tmp, conv_cov);
        channel_planes(a, c, pa);
        channel_planes(b, c, pb);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                size_t i = size_t(y) * W + x;
                grad.at(x, y, c) =
                    conv_mu[i] + 2.0 * pa[i] * conv_var[i] + pb[i] * conv_cov[i];
            }
    }
    return mean_acc / (double(n) * a.channels);
}

}  // namespace splatscan
