#pragma once

#include "lpnuq/common.hpp"

namespace lpnuq {

struct MetricConfig {
    double data_range = 1.0;
    int ssim_window = 7; // odd
    double ssim_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Pixel-wise clamp to [0, 1]. Idempotent.
Vec clamp01(const Vec& x);

/// 10 * log10(data_range^2 / MSE); +infinity when MSE == 0.
double psnr(const Vec& x, const Vec& ref, const MetricConfig& cfg = {});

/// Mean local SSIM with a Gaussian window, evaluated over all fully
/// supported window positions. Symmetric in its arguments.
double ssim(const Vec& x, const Vec& ref, int side,
            const MetricConfig& cfg = {});

} // namespace lpnuq
