#include "lpnuq/solver.hpp"

#include <cmath>

#include "lpnuq/fbp.hpp"
#include "lpnuq/metrics.hpp"

namespace lpnuq {

SolveResult reconstruct(const SparseOperator& op, const Vec& y,
                        const ProxFn& prox, const SolveConfig& cfg,
                        const Vec& init)
{
    if (y.size() != op.rows)
        throw std::invalid_argument("reconstruct: measurement size mismatch");
    if (init.size() != op.cols)
        throw std::invalid_argument("reconstruct: init size mismatch");
    if (cfg.max_iters < 1)
        throw std::invalid_argument("reconstruct: max_iters must be >= 1");
    if (!(cfg.step_scale > 0.0 && cfg.step_scale < 2.0))
        throw std::invalid_argument("reconstruct: step_scale must be in (0,2)");
    if (cfg.tau < 0.0)
        throw std::invalid_argument("reconstruct: tau must be >= 0");
    if (!(cfg.reg_weight > 0.0))
        throw std::invalid_argument("reconstruct: reg_weight must be > 0");

    const double norm_sq =
        cfg.op_norm_sq > 0.0 ? cfg.op_norm_sq : operator_norm_sq(op);
    if (!(norm_sq > 0.0))
        throw std::invalid_argument("reconstruct: zero operator norm");
    const double eta = cfg.step_scale / norm_sq;
    const double prox_scale = std::min(1.0, cfg.reg_weight * eta);

    SolveResult res;
    res.image = cfg.clamp_iterates ? clamp01(init) : init;
    Vec& x = res.image;
    SolveTrace& trace = res.trace;

    Vec resid = op.matrix * x - y;
    trace.fidelity.push_back(resid.squaredNorm());

    for (int k = 0; k < cfg.max_iters; ++k) {
        const Vec v = x - eta * (op.matrix.transpose() * resid);
        Vec next = prox(v);
        if (next.size() != op.cols)
            throw std::invalid_argument("reconstruct: prox returned wrong size");
        if (prox_scale != 1.0)
            next = v + prox_scale * (next - v);
        if (cfg.clamp_iterates)
            next = clamp01(next);
        if (!next.allFinite())
            throw SolveDivergence(
                "reconstruct: non-finite iterate at iteration "
                    + std::to_string(k),
                std::move(trace));

        const double change = (next - x).norm();
        const double base = std::max(x.norm(), 1e-12);
        x = std::move(next);
        resid = op.matrix * x - y;
        trace.fidelity.push_back(resid.squaredNorm());
        trace.iterations = k + 1;
        if (change / base < cfg.tau) {
            trace.converged = true;
            break;
        }
    }
    return res;
}

SolveResult reconstruct(const ScanGeometry& geom, const AngleSet& angles,
                        const SparseOperator& op, const Vec& y,
                        const ProxFn& prox, const SolveConfig& cfg)
{
    Vec init;
    switch (cfg.init) {
    case InitMode::Zeros:
        init = Vec::Zero(op.cols);
        break;
    case InitMode::Fbp:
        init = fbp_reconstruct(geom, angles, y);
        break;
    }
    return reconstruct(op, y, prox, cfg, init);
}

} // namespace lpnuq
