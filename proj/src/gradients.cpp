// Reverse-mode differentiation of the splatting renderer: compositing,
// per-pixel opacity, EWA projection (including the Jacobian's dependence on
// the transformed mean) and the quaternion-to-rotation chain.
#include <cmath>
#include <stdexcept>

#include "splatscan/optimizer.hpp"
#include "splatscan/ssim.hpp"

namespace splatscan {

namespace {

struct SplatGrad {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();
    Vec3 color = Vec3::Zero();
    double base_opacity = 0.0;
    bool touched = false;
};

// Partial derivatives of the rotation matrix w.r.t. the normalized quaternion
// components (w, x, y, z).
void rotation_quat_partials(const Quat& qn, Mat3 dR[4]) {
    double w = qn.w(), x = qn.x(), y = qn.y(), z = qn.z();
    dR[0] << 0, -z, y,
             z, 0, -x,
             -y, x, 0;
    dR[1] << 0, y, z,
             y, -2 * x, -w,
             z, w, -2 * x;
    dR[2] << -2 * y, x, w,
             x, 0, z,
             -w, z, -2 * y;
    dR[3] << -2 * z, -w, x,
             w, -2 * z, y,
             x, y, 0;
    for (int k = 0; k < 4; ++k) dR[k] *= 2.0;
}

}  // namespace

void render_backward(const Scene& scene, const Camera& cam, const SplatBatch& batch,
                     const RenderConfig& cfg, const Image& grad_color,
                     std::vector<double>& grad_params) {
    if (grad_color.width != batch.width || grad_color.height != batch.height ||
        grad_color.channels != 3)
        throw std::invalid_argument("render_backward: grad_color shape mismatch");
    if (grad_params.size() != scene.gaussians.size() * kParamsPerGaussian)
        throw std::invalid_argument("render_backward: grad_params size mismatch");

    std::vector<SplatGrad> sgrads(batch.splats.size());

    struct Contrib {
        uint32_t splat;
        double alpha;
        double T;  // transmittance in front of this splat
    };
    std::vector<Contrib> contribs;
    contribs.reserve(64);

    const Vec3 bg = scene.background_color;

    for (int y = 0; y < batch.height; ++y) {
        for (int x = 0; x < batch.width; ++x) {
            size_t p = size_t(y) * batch.width + x;
            if (batch.offsets[p] == batch.offsets[p + 1]) continue;
            double px = x + 0.5, py = y + 0.5;
            Vec3 g(grad_color.at(x, y, 0), grad_color.at(x, y, 1), grad_color.at(x, y, 2));

            // Replay the forward compositing to recover alpha and transmittance
            // per contributor; the early-out must match the forward pass exactly.
            contribs.clear();
            double T = 1.0;
            for (uint32_t e = batch.offsets[p]; e < batch.offsets[p + 1]; ++e) {
                const Splat2D& s = batch.splats[batch.entries[e]];
                double a = splat_alpha(s, px, py, cfg);
                if (a <= 0.0) continue;
                contribs.push_back({batch.entries[e], a, T});
                T *= 1.0 - a;
                if (T < cfg.t_min) break;
            }

            // Back-to-front sweep. S carries g . (everything composited behind
            // the current splat, background included).
            double S = T * g.dot(bg);
            for (size_t i = contribs.size(); i-- > 0;) {
                const Contrib& ct = contribs[i];
                const Splat2D& s = batch.splats[ct.splat];
                SplatGrad& sg = sgrads[ct.splat];
                sg.touched = true;

                double gc = g.dot(s.color);
                sg.color += ct.T * ct.alpha * g;
                double d_alpha = ct.T * gc - S / (1.0 - ct.alpha);
                S += ct.T * ct.alpha * gc;

                if (ct.alpha >= cfg.alpha_max) continue;  // clamped: flat w.r.t. shape
                // alpha = base * exp(-q/2); within the 3-sigma support.
                Vec2 d(px - s.mean2d[0], py - s.mean2d[1]);
                Vec2 m = s.cov_inv * d;
                sg.mean2d += d_alpha * ct.alpha * m;
                sg.cov2d += (0.5 * d_alpha * ct.alpha) * (m * m.transpose());
                sg.base_opacity += d_alpha * (ct.alpha / s.base_opacity);
            }
        }
    }

    // Chain rule from 2D splat space back to the 3D Gaussian parameters.
    for (size_t si = 0; si < batch.splats.size(); ++si) {
        if (!sgrads[si].touched) continue;
        const Splat2D& s = batch.splats[si];
        const SplatGrad& sg = sgrads[si];
        const Gaussian3D& g3 = scene.gaussians[size_t(s.gaussian_index)];
        double* gp = grad_params.data() + size_t(s.gaussian_index) * kParamsPerGaussian;

        Vec3 p_cam = cam.world_to_camera(g3.mean);
        double xc = p_cam[0], yc = p_cam[1], zc = p_cam[2];
        double z2 = zc * zc, z3 = z2 * zc;

        Eigen::Matrix<double, 2, 3> J;
        J << cam.fx / zc, 0.0, -cam.fx * xc / z2,
             0.0, cam.fy / zc, -cam.fy * yc / z2;
        Eigen::Matrix<double, 2, 3> A = J * cam.rotation;

        double qnorm = g3.rotation.norm();
        Quat qn = g3.rotation;
        qn.normalize();
        Mat3 R = qn.toRotationMatrix();
        Vec3 s2 = g3.scales.cwiseProduct(g3.scales);
        Mat3 V3 = R * s2.asDiagonal() * R.transpose();

        // Covariance chain: C = A V3 A^T + eps I.
        const Mat2& Gc = sg.cov2d;
        Mat3 Gv3 = A.transpose() * Gc * A;
        Eigen::Matrix<double, 2, 3> GA = 2.0 * Gc * A * V3;
        Eigen::Matrix<double, 2, 3> GJ = GA * cam.rotation.transpose();

        // Projected-mean chain plus the Jacobian's own dependence on p_cam.
        Vec3 g_pcam = J.transpose() * sg.mean2d;
        g_pcam[0] += GJ(0, 2) * (-cam.fx / z2);
        g_pcam[1] += GJ(1, 2) * (-cam.fy / z2);
        g_pcam[2] += GJ(0, 0) * (-cam.fx / z2) + GJ(0, 2) * (2.0 * cam.fx * xc / z3) +
                     GJ(1, 1) * (-cam.fy / z2) + GJ(1, 2) * (2.0 * cam.fy * yc / z3);
        Vec3 g_mean = cam.rotation.transpose() * g_pcam;

        // V3 = R diag(s^2) R^T.
        Mat3 RtGR = R.transpose() * Gv3 * R;
        Vec3 g_scales;
        for (int k = 0; k < 3; ++k) g_scales[k] = 2.0 * g3.scales[k] * RtGR(k, k);
        Mat3 GR = 2.0 * Gv3 * R * s2.asDiagonal();

        Mat3 dR[4];
        rotation_quat_partials(qn, dR);
        Eigen::Vector4d g_qhat;
        for (int k = 0; k < 4; ++k) g_qhat[k] = (GR.cwiseProduct(dR[k])).sum();
        // Through the normalization q_hat = q / |q|.
        Eigen::Vector4d qh(qn.w(), qn.x(), qn.y(), qn.z());
        Eigen::Vector4d g_q = (g_qhat - qh * qh.dot(g_qhat)) / qnorm;

        for (int k = 0; k < 3; ++k) gp[0 + k] += g_mean[k];
        for (int k = 0; k < 3; ++k) gp[3 + k] += g_scales[k];
        for (int k = 0; k < 4; ++k) gp[6 + k] += g_q[k];
        for (int k = 0; k < 3; ++k) gp[10 + k] += sg.color[k];
        gp[13] += sg.base_opacity;
    }
}

double photometric_loss(const Image& rendered, const Image& gt, double lambda_ssim) {
    if (!rendered.same_dims(gt))
        throw std::invalid_argument("photometric_loss: image dimensions differ");
    double l1 = 0.0;
    for (size_t i = 0; i < rendered.data.size(); ++i)
        l1 += std::abs(rendered.data[i] - gt.data[i]);
    l1 /= double(rendered.data.size());
    if (lambda_ssim == 0.0) return l1;
    return (1.0 - lambda_ssim) * l1 + lambda_ssim * (1.0 - ssim_mean(rendered, gt));
}

Image photometric_loss_backward(const Image& rendered, const Image& gt, double lambda_ssim) {
    Image grad;
    photometric_loss_with_backward(rendered, gt, lambda_ssim, grad);
    return grad;
}

double photometric_loss_with_backward(const Image& rendered, const Image& gt, double lambda_ssim,
                                      Image& grad_out) {
    if (!rendered.same_dims(gt))
        throw std::invalid_argument("photometric_loss_backward: image dimensions differ");
    double ssim = 1.0;
    if (lambda_ssim != 0.0)
        ssim = ssim_mean_and_backward(rendered, gt, -lambda_ssim, grad_out);
    else
        grad_out = Image(rendered.width, rendered.height, rendered.channels);

    double l1 = 0.0;
    double w = (1.0 - lambda_ssim) / double(rendered.data.size());
    for (size_t i = 0; i < rendered.data.size(); ++i) {
        double d = rendered.data[i] - gt.data[i];
        l1 += std::abs(d);
        if (d > 0)
            grad_out.data[i] += w;
        else if (d < 0)
            grad_out.data[i] -= w;
    }
    l1 /= double(rendered.data.size());
    return (1.0 - lambda_ssim) * l1 + lambda_ssim * (1.0 - ssim);
}

}  // namespace splatscan
