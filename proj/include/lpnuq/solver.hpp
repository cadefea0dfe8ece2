#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "lpnuq/common.hpp"
#include "lpnuq/geometry.hpp"

namespace lpnuq {

enum class InitMode { Zeros, Fbp };

struct SolveConfig {
    int max_iters = 200;
    double step_scale = 1.0; // eta = step_scale / ||A||^2, must be in (0,2)
    double tau = 1e-4;       // relative-change stopping tolerance
    InitMode init = InitMode::Fbp;
    bool clamp_iterates = true; // clamp x to [0,1] after each prox
    double op_norm_sq = 0.0;    // > 0: reuse a precomputed ||A||^2

    // Regularization weight w > 0. Each iteration applies the proximal
    // displacement scaled by min(1, w * eta): x <- v + min(1, w*eta) * (prox(v) - v).
    // A proximal step for the penalty w*R at step size eta needs the proximal
    // operator at strength w*eta, while a learned operator comes at the fixed
    // strength of its training noise; scaling the displacement is the
    // first-order correction. Tying the scale to eta = step_scale / ||A||^2
    // keeps the effective penalty weight independent of how many views were
    // measured. Values >= ||A||^2 / step_scale apply the operator exactly.
    double reg_weight = 115.0;
};

struct SolveTrace {
    std::vector<double> fidelity; // ||A x^(k) - y||^2 for k = 0..K
    int iterations = 0;
    bool converged = false;
};

struct SolveResult {
    Vec image;
    SolveTrace trace;
};

/// Raised when an iterate goes non-finite; carries the trace so far.
struct SolveDivergence : std::runtime_error {
    SolveDivergence(const std::string& what, SolveTrace partial)
        : std::runtime_error(what), trace(std::move(partial))
    {
    }
    SolveTrace trace;
};

using ProxFn = std::function<Vec(const Vec&)>;

/// Proximal gradient iteration from an explicit starting image:
///   v = x - eta A^T (A x - y),  x <- prox(v)
/// Stops at max_iters or when the relative iterate change drops below tau.
SolveResult reconstruct(const SparseOperator& op, const Vec& y,
                        const ProxFn& prox, const SolveConfig& cfg,
                        const Vec& init);

/// Same loop with the starting image chosen by cfg.init (zeros, or a
/// filtered back-projection of y on the given geometry).
SolveResult reconstruct(const ScanGeometry& geom, const AngleSet& angles,
                        const SparseOperator& op, const Vec& y,
                        const ProxFn& prox, const SolveConfig& cfg);

} // namespace lpnuq
