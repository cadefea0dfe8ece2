#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lpnuq/common.hpp"
#include "lpnuq/fbp.hpp"
#include "lpnuq/geometry.hpp"
#include "lpnuq/prior.hpp"
#include "lpnuq/solver.hpp"

namespace lpnuq {

/// How each seed obtains its measurements: a fresh acquisition draws new
/// noise per seed; fixed-pool mode simulates one noisy full-grid
/// acquisition and lets the seeds pick view subsets out of it.
enum class ResampleMode { FreshAcquisition, FixedPoolSubsets };

struct UqProtocol {
    int n_views = 11;
    int n_seeds = 10;
    double sigma = 2.0; // sinogram noise std
    std::uint64_t base_seed = 0;
    ResampleMode resample_mode = ResampleMode::FreshAcquisition;
    SolveConfig solver;
};

struct UncertaintyReport {
    std::vector<Vec> reconstructions; // one per seed
    Vec mean_image;                   // pixel-wise mean
    Vec std_image;                    // pixel-wise std, population convention
    double score = 0.0;               // mean over pixels of std_image
    std::vector<double> psnr;         // per seed, against the ground truth
    std::vector<double> ssim;
};

/// Uniform sample of n_views candidate angles without replacement;
/// deterministic per seed.
AngleSet draw_angle_subset(const ScanGeometry& geom, int n_views,
                           std::uint64_t seed);

/// y = A x_true + sigma * eps with eps standard normal, seeded. With
/// sigma = 0 the result is the exact forward projection.
Vec simulate_measurement(const SparseOperator& op, const Vec& x_true,
                         double sigma, std::uint64_t seed);

/// One full reconstruction from a measured subset.
using Reconstructor = std::function<Vec(
    const ScanGeometry&, const AngleSet&, const SparseOperator&, const Vec&)>;

Reconstructor make_pgd_reconstructor(ProxFn prox, SolveConfig cfg);
Reconstructor make_fbp_reconstructor(FbpConfig cfg = {});

/// Resample-and-reconstruct loop. Per seed s, the angle subset is drawn
/// with seed base*10007+s and the measurement noise with base*10009+s
/// (fixed-pool mode draws the pool noise once with seed base*10009).
UncertaintyReport run_uq(const Vec& x_true, const ScanGeometry& geom,
                         const UqProtocol& protocol,
                         const Reconstructor& reconstructor);

/// Convenience overload: proximal-gradient reconstruction with the given
/// prox handle and protocol.solver.
UncertaintyReport run_uq(const Vec& x_true, const ScanGeometry& geom,
                         const UqProtocol& protocol, const ProxFn& prox);

/// True when the report's variability score exceeds the threshold.
bool ood_flag(const UncertaintyReport& report, double threshold);

} // namespace lpnuq
