#include "lpnuq/uq.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lpnuq/metrics.hpp"
#include "lpnuq/rng.hpp"

namespace lpnuq {

AngleSet draw_angle_subset(const ScanGeometry& geom, int n_views,
                           std::uint64_t seed)
{
    if (n_views < 1 || n_views > geom.candidate_angles)
        throw std::invalid_argument("draw_angle_subset: n_views out of range");
    Rng rng(seed);
    return make_angle_set(
        rng.sample_without_replacement(geom.candidate_angles, n_views), geom);
}

Vec simulate_measurement(const SparseOperator& op, const Vec& x_true,
                         double sigma, std::uint64_t seed)
{
    if (sigma < 0.0)
        throw std::invalid_argument("simulate_measurement: negative sigma");
    Vec y = forward(op, x_true);
    if (sigma > 0.0) {
        Rng rng(seed);
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y[i] += sigma * rng.gaussian();
    }
    return y;
}

Reconstructor make_pgd_reconstructor(ProxFn prox, SolveConfig cfg)
{
    return [prox = std::move(prox), cfg](const ScanGeometry& geom,
                                         const AngleSet& angles,
                                         const SparseOperator& op,
                                         const Vec& y) {
        return reconstruct(geom, angles, op, y, prox, cfg).image;
    };
}

Reconstructor make_fbp_reconstructor(FbpConfig cfg)
{
    return [cfg](const ScanGeometry& geom, const AngleSet& angles,
                 const SparseOperator&, const Vec& y) {
        // Clamp like the iterative path so variability is measured on the
        // same pixel range for both methods.
        return clamp01(fbp_reconstruct(geom, angles, y, cfg));
    };
}

namespace {

// Pull the rows of a chosen angle subset out of a full-grid operator and
// measurement, renumbering rays to the subset's view order.
void extract_subset(const ScanGeometry& geom, const SparseOperator& full_op,
                    const Vec& full_y, const AngleSet& angles,
                    SparseOperator& sub_op, Vec& sub_y)
{
    const int bins = geom.detector_bins;
    std::vector<int> pos(static_cast<size_t>(geom.candidate_angles), -1);
    for (int v = 0; v < angles.n_views(); ++v)
        pos[static_cast<size_t>(angles.indices[static_cast<size_t>(v)])] = v;

    std::vector<OperatorWeight> weights;
    for (const OperatorWeight& w : full_op.weights) {
        const int a = w.ray / bins;
        const int p = pos[static_cast<size_t>(a)];
        if (p < 0)
            continue;
        weights.push_back({p * bins + w.ray % bins, w.pixel, w.value});
    }
    sub_op = make_operator(angles.n_views() * bins, full_op.cols,
                           std::move(weights));

    sub_y.resize(static_cast<Eigen::Index>(angles.n_views()) * bins);
    for (int v = 0; v < angles.n_views(); ++v) {
        const int a = angles.indices[static_cast<size_t>(v)];
        for (int t = 0; t < bins; ++t)
            sub_y[static_cast<Eigen::Index>(v) * bins + t] =
                full_y[static_cast<Eigen::Index>(a) * bins + t];
    }
}

} // namespace

UncertaintyReport run_uq(const Vec& x_true, const ScanGeometry& geom,
                         const UqProtocol& protocol,
                         const Reconstructor& reconstructor)
{
    const Eigen::Index n = geom.pixels();
    if (x_true.size() != n)
        throw std::invalid_argument("run_uq: image size mismatch");
    if (protocol.n_seeds < 2)
        throw std::invalid_argument("run_uq: need at least 2 seeds");
    if (protocol.sigma < 0.0)
        throw std::invalid_argument("run_uq: negative sigma");

    SparseOperator full_op;
    Vec full_y;
    if (protocol.resample_mode == ResampleMode::FixedPoolSubsets) {
        full_op = build_operator(geom, full_angle_set(geom));
        full_y = simulate_measurement(full_op, x_true, protocol.sigma,
                                      protocol.base_seed * 10009);
    }

    UncertaintyReport report;
    report.reconstructions.reserve(static_cast<size_t>(protocol.n_seeds));
    for (int s = 0; s < protocol.n_seeds; ++s) {
        const std::uint64_t angle_seed = protocol.base_seed * 10007 + s;
        const std::uint64_t noise_seed = protocol.base_seed * 10009 + s;
        const AngleSet angles =
            draw_angle_subset(geom, protocol.n_views, angle_seed);

        SparseOperator op;
        Vec y;
        if (protocol.resample_mode == ResampleMode::FreshAcquisition) {
            op = build_operator(geom, angles);
            y = simulate_measurement(op, x_true, protocol.sigma, noise_seed);
        } else {
            extract_subset(geom, full_op, full_y, angles, op, y);
        }

        Vec recon;
        try {
            recon = reconstructor(geom, angles, op, y);
        } catch (const std::exception& e) {
            throw std::runtime_error("run_uq: reconstruction failed for seed "
                                     + std::to_string(s) + ": " + e.what());
        }
        if (recon.size() != n)
            throw std::runtime_error("run_uq: reconstruction has wrong size");

        const Vec clamped = clamp01(recon);
        report.psnr.push_back(psnr(clamped, x_true));
        report.ssim.push_back(ssim(clamped, x_true, geom.image_side));
        report.reconstructions.push_back(std::move(recon));
    }

    const double count = protocol.n_seeds;
    report.mean_image.resize(n);
    report.std_image.resize(n);
    for (Eigen::Index p = 0; p < n; ++p) {
        bool all_equal = true;
        const double first = report.reconstructions[0][p];
        double sum = 0.0;
        for (const Vec& r : report.reconstructions) {
            all_equal = all_equal && (r[p] == first);
            sum += r[p];
        }
        const double mean = sum / count;
        report.mean_image[p] = all_equal ? first : mean;
        if (all_equal) {
            // Exactly zero spread; avoids rounding residue so a zero score
            // certifies identical reconstructions.
            report.std_image[p] = 0.0;
            continue;
        }
        double sq = 0.0;
        for (const Vec& r : report.reconstructions) {
            const double d = r[p] - mean;
            sq += d * d;
        }
        report.std_image[p] = std::sqrt(sq / count);
    }
    report.score = report.std_image.sum() / static_cast<double>(n);
    return report;
}

UncertaintyReport run_uq(const Vec& x_true, const ScanGeometry& geom,
                         const UqProtocol& protocol, const ProxFn& prox)
{
    return run_uq(x_true, geom, protocol,
                  make_pgd_reconstructor(prox, protocol.solver));
}

bool ood_flag(const UncertaintyReport& report, double threshold)
{
    if (threshold < 0.0)
        throw std::invalid_argument("ood_flag: negative threshold");
    return report.score > threshold;
}

} // namespace lpnuq
