// SSIM with an 11x11 Gaussian window (sigma = 1.5), C1 = 0.01^2, C2 = 0.03^2
// on unit dynamic range. Computed per channel and averaged; image borders are
// handled by renormalizing the clipped window.
#pragma once

#include "splatscan/image.hpp"

namespace splatscan {

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Per-pixel SSIM map (H x W x 1), values in [-1, 1]. Throws on dimension
// mismatch.
Image ssim_map(const Image& a, const Image& b);

double ssim_mean(const Image& a, const Image& b);

// Gradient of `upstream * ssim_mean(a, b)` with respect to a. Same shape as a.
Image ssim_mean_backward(const Image& a, const Image& b, double upstream);

// Fused mean + gradient, sharing the windowed moments (one pass instead of
// two). Returns the mean; writes the gradient into grad_out.
double ssim_mean_and_backward(const Image& a, const Image& b, double upstream, Image& grad_out);

}  // namespace splatscan
