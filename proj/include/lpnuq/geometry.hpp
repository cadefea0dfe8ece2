#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

#include "lpnuq/common.hpp"

namespace lpnuq {

/// Circular fan-beam acquisition: a point source and a flat detector rotate
/// around the isocenter of a square pixel grid. All lengths are in pixel
/// units. detector_spacing <= 0 requests the default spacing, which makes the
/// detector exactly cover the magnified image diagonal.
struct ScanGeometry {
    int image_side = 28;
    int detector_bins = 22;
    double source_to_center = 56.0;
    double center_to_detector = 56.0;
    double detector_spacing = 0.0;
    int candidate_angles = 360;

    int pixels() const { return image_side * image_side; }
    double magnification() const {
        return (source_to_center + center_to_detector) / source_to_center;
    }
    /// View angle (radians) of candidate index a.
    double view_angle(int a) const;
};

/// Validates a geometry and fills in the default detector spacing.
/// Throws std::invalid_argument if the detector does not subtend the full
/// magnified image diagonal.
ScanGeometry make_geometry(ScanGeometry g = {});

/// Ordered set of distinct candidate-angle indices.
struct AngleSet {
    std::vector<int> indices;

    int n_views() const { return static_cast<int>(indices.size()); }
};

/// Validates indices: distinct, in [0, candidate_angles), 1 <= size <= candidates.
AngleSet make_angle_set(std::vector<int> indices, const ScanGeometry& g);

/// All candidate angles in ascending order.
AngleSet full_angle_set(const ScanGeometry& g);

struct OperatorWeight {
    int ray;
    int pixel;
    double value;
};

/// Materialized sparse forward operator. Row r measures
/// (view floor(r / detector_bins), bin r % detector_bins) in AngleSet order.
/// Immutable after construction; safe for concurrent read-only use.
struct SparseOperator {
    int rows = 0;
    int cols = 0;
    std::vector<OperatorWeight> weights; // sorted by (ray, pixel), all > 0
    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
};

/// Ray-tracing discretization of the fan-beam line integrals: each ray is
/// sampled at unit steps with bilinear pixel weights. Deterministic.
SparseOperator build_operator(const ScanGeometry& g, const AngleSet& angles);

/// Assembles an operator from explicit weights (validated: finite, > 0,
/// indices in range). Weights are sorted by (ray, pixel); duplicates summed.
SparseOperator make_operator(int rows, int cols,
                             std::vector<OperatorWeight> weights);

/// y = A x
Vec forward(const SparseOperator& op, const Vec& x);

/// Exact adjoint: A^T u (transpose of the stored weights).
Vec adjoint(const SparseOperator& op, const Vec& u);

/// Thrown when power iteration fails to converge; carries the last estimate.
struct PowerIterationError : std::runtime_error {
    double last_estimate;
    PowerIterationError(const std::string& msg, double estimate)
        : std::runtime_error(msg), last_estimate(estimate) {}
};

/// Largest squared singular value of A via power iteration on A^T A,
/// to relative tolerance 1e-6.
double operator_norm_sq(const SparseOperator& op);

} // namespace lpnuq
