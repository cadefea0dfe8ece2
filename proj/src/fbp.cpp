#include "lpnuq/fbp.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace lpnuq {

namespace {

int next_pow2(int n)
{
    int p = 1;
    while (p < n)
        p *= 2;
    return p;
}

} // namespace

Vec fbp_reconstruct(const ScanGeometry& geometry, const AngleSet& angles,
                    const Vec& sinogram, const FbpConfig& cfg)
{
    const ScanGeometry geom = make_geometry(geometry); // resolves spacing
    const int bins = geom.detector_bins;
    const int n_views = angles.n_views();
    if (n_views == 0)
        throw std::invalid_argument("fbp_reconstruct: empty angle set");
    if (sinogram.size() != static_cast<Eigen::Index>(n_views) * bins)
        throw std::invalid_argument("fbp_reconstruct: sinogram size mismatch");
    if (cfg.cutoff <= 0.0 || cfg.cutoff > 1.0)
        throw std::invalid_argument("fbp_reconstruct: cutoff must be in (0, 1]");

    const double src = geom.source_to_center;
    const double mag = geom.magnification();
    // Detector rebinned to a virtual line through the isocenter.
    const double ds = geom.detector_spacing / mag;
    const double s0 = -(bins - 1) / 2.0 * ds;

    // Ramp filter samples on the padded FFT grid, in physical frequency.
    const int nfft = next_pow2(2 * bins);
    const double fnyq = 0.5 / ds;
    std::vector<double> ramp(static_cast<size_t>(nfft));
    for (int k = 0; k < nfft; ++k) {
        const int kk = (k <= nfft / 2) ? k : k - nfft;
        const double f = std::abs(kk) / (nfft * ds);
        ramp[static_cast<size_t>(k)] =
            (f <= cfg.cutoff * fnyq * (1.0 + 1e-12)) ? f : 0.0;
    }

    Eigen::FFT<double> fft;
    Mat filtered(n_views, bins);
    std::vector<std::complex<double>> time(static_cast<size_t>(nfft));
    std::vector<std::complex<double>> freq;
    for (int v = 0; v < n_views; ++v) {
        for (int t = 0; t < nfft; ++t) {
            double g = 0.0;
            if (t < bins) {
                g = sinogram[static_cast<Eigen::Index>(v) * bins + t];
                if (cfg.fan_weighting) {
                    const double s = s0 + t * ds;
                    g *= src / std::sqrt(src * src + s * s);
                }
            }
            time[static_cast<size_t>(t)] = {g, 0.0};
        }
        fft.fwd(freq, time);
        for (int k = 0; k < nfft; ++k)
            freq[static_cast<size_t>(k)] *= ramp[static_cast<size_t>(k)];
        fft.inv(time, freq);
        for (int t = 0; t < bins; ++t)
            filtered(v, t) = time[static_cast<size_t>(t)].real();
    }

    const int side = geom.image_side;
    const double half = (side - 1) / 2.0;
    Vec image = Vec::Zero(static_cast<Eigen::Index>(side) * side);
    const double scale = M_PI / n_views;
    for (int v = 0; v < n_views; ++v) {
        const double beta = geom.view_angle(angles.indices[static_cast<size_t>(v)]);
        const double cb = std::cos(beta);
        const double sb = std::sin(beta);
        for (int row = 0; row < side; ++row) {
            const double py = row - half;
            for (int col = 0; col < side; ++col) {
                const double px = col - half;
                // Rotate into the view frame: xp along source-to-center,
                // yp along the detector axis.
                const double xp = px * cb + py * sb;
                const double yp = -px * sb + py * cb;
                const double u = (src + xp) / src;
                if (u <= 1e-9)
                    continue; // behind the source
                const double s = (src * yp) / (src + xp);
                const double pos = (s - s0) / ds;
                const int i0 = static_cast<int>(std::floor(pos));
                if (i0 < -1 || i0 > bins - 1)
                    continue;
                const double frac = pos - i0;
                double q = 0.0;
                if (i0 >= 0)
                    q += (1.0 - frac) * filtered(v, i0);
                if (i0 + 1 <= bins - 1)
                    q += frac * filtered(v, i0 + 1);
                const double w = cfg.fan_weighting ? 1.0 / (u * u) : 1.0;
                image[static_cast<Eigen::Index>(row) * side + col] += scale * w * q;
            }
        }
    }
    return image;
}

} // namespace lpnuq
