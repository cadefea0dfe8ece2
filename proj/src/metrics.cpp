#include "lpnuq/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace lpnuq {

Vec clamp01(const Vec& x)
{
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double v = x[i];
        if (v < 0.0)
            v = 0.0;
        else if (v > 1.0)
            v = 1.0;
        out[i] = v;
    }
    return out;
}

double psnr(const Vec& x, const Vec& ref, const MetricConfig& cfg)
{
    if (x.size() != ref.size() || x.size() == 0)
        throw std::invalid_argument("psnr: size mismatch");
    // Neumaier-compensated sum; keeps constant-offset inputs bit-exact.
    double sum = 0.0, comp = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double d = x[i] - ref[i];
        const double v = d * d;
        const double t = sum + v;
        comp += (std::abs(sum) >= std::abs(v)) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    const double mse = (sum + comp) / static_cast<double>(x.size());
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(cfg.data_range / std::sqrt(mse));
}

namespace {

std::vector<double> gaussian_window(int w, double sigma)
{
    std::vector<double> k(static_cast<size_t>(w) * w);
    const double c = (w - 1) / 2.0;
    double sum = 0.0;
    for (int r = 0; r < w; ++r)
        for (int col = 0; col < w; ++col) {
            const double dr = r - c;
            const double dc = col - c;
            const double v = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
            k[static_cast<size_t>(r) * w + col] = v;
            sum += v;
        }
    for (double& v : k)
        v /= sum;
    return k;
}

} // namespace

double ssim(const Vec& x, const Vec& ref, int side, const MetricConfig& cfg)
{
    if (side <= 0 || x.size() != ref.size()
        || x.size() != static_cast<Eigen::Index>(side) * side)
        throw std::invalid_argument("ssim: bad image size");
    const int w = cfg.ssim_window;
    if (w <= 0 || w % 2 == 0 || w > side)
        throw std::invalid_argument("ssim: bad window");

    const std::vector<double> win = gaussian_window(w, cfg.ssim_sigma);
    const double c1 = (cfg.k1 * cfg.data_range) * (cfg.k1 * cfg.data_range);
    const double c2 = (cfg.k2 * cfg.data_range) * (cfg.k2 * cfg.data_range);

    const int valid = side - w + 1;
    double total = 0.0;
    for (int r0 = 0; r0 < valid; ++r0) {
        for (int c0 = 0; c0 < valid; ++c0) {
            double mx = 0.0, my = 0.0;
            for (int r = 0; r < w; ++r)
                for (int c = 0; c < w; ++c) {
                    const double wt = win[static_cast<size_t>(r) * w + c];
                    const size_t p = static_cast<size_t>(r0 + r) * side + (c0 + c);
                    mx += wt * x[static_cast<Eigen::Index>(p)];
                    my += wt * ref[static_cast<Eigen::Index>(p)];
                }
            double sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int r = 0; r < w; ++r)
                for (int c = 0; c < w; ++c) {
                    const double wt = win[static_cast<size_t>(r) * w + c];
                    const size_t p = static_cast<size_t>(r0 + r) * side + (c0 + c);
                    const double dx = x[static_cast<Eigen::Index>(p)] - mx;
                    const double dy = ref[static_cast<Eigen::Index>(p)] - my;
                    sxx += wt * dx * dx;
                    syy += wt * dy * dy;
                    sxy += wt * dx * dy;
                }
            const double num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
            const double den = (mx * mx + my * my + c1) * (sxx + syy + c2);
            total += num / den;
        }
    }
    return total / (static_cast<double>(valid) * valid);
}

} // namespace lpnuq
