#include "lpnuq/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_set>

namespace lpnuq {

double ScanGeometry::view_angle(int a) const {
    return 2.0 * std::numbers::pi * static_cast<double>(a) /
           static_cast<double>(candidate_angles);
}

ScanGeometry make_geometry(ScanGeometry g) {
    if (g.image_side < 1) {
        throw std::invalid_argument("geometry: image_side must be >= 1");
    }
    if (g.detector_bins < 1) {
        throw std::invalid_argument("geometry: detector_bins must be >= 1");
    }
    if (g.source_to_center <= 0.0 || g.center_to_detector <= 0.0) {
        throw std::invalid_argument("geometry: distances must be > 0");
    }
    if (g.candidate_angles < 1) {
        throw std::invalid_argument("geometry: candidate_angles must be >= 1");
    }
    const double diagonal =
        g.magnification() * g.image_side * std::numbers::sqrt2;
    if (g.detector_spacing <= 0.0) {
        g.detector_spacing = diagonal / g.detector_bins;
    }
    const double extent = g.detector_bins * g.detector_spacing;
    if (extent < diagonal * (1.0 - 1e-9)) {
        throw std::invalid_argument(
            "geometry: detector extent " + std::to_string(extent) +
            " does not subtend the magnified image diagonal " +
            std::to_string(diagonal));
    }
    return g;
}

AngleSet make_angle_set(std::vector<int> indices, const ScanGeometry& g) {
    if (indices.empty() ||
        indices.size() > static_cast<std::size_t>(g.candidate_angles)) {
        throw std::invalid_argument("angle set: size must be in [1, candidates]");
    }
    std::unordered_set<int> seen;
    for (int a : indices) {
        if (a < 0 || a >= g.candidate_angles) {
            throw std::invalid_argument("angle set: index out of range");
        }
        if (!seen.insert(a).second) {
            throw std::invalid_argument("angle set: duplicate index");
        }
    }
    return AngleSet{std::move(indices)};
}

AngleSet full_angle_set(const ScanGeometry& g) {
    std::vector<int> all(static_cast<std::size_t>(g.candidate_angles));
    for (int a = 0; a < g.candidate_angles; ++a) {
        all[static_cast<std::size_t>(a)] = a;
    }
    return AngleSet{std::move(all)};
}

namespace {

// Entry/exit parameters of ray p = origin + t*dir against the square
// [-half, half]^2. Returns false if the ray misses.
bool intersect_box(double ox, double oy, double dx, double dy, double half,
                   double& t0, double& t1) {
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    const double o[2] = {ox, oy};
    const double d[2] = {dx, dy};
    for (int k = 0; k < 2; ++k) {
        if (std::abs(d[k]) < 1e-12) {
            if (o[k] < -half || o[k] > half) {
                return false;
            }
            continue;
        }
        double ta = (-half - o[k]) / d[k];
        double tb = (half - o[k]) / d[k];
        if (ta > tb) {
            std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t0 < t1;
}

} // namespace

SparseOperator build_operator(const ScanGeometry& geometry,
                              const AngleSet& angles) {
    const ScanGeometry g = make_geometry(geometry); // re-validate
    make_angle_set(angles.indices, g);

    const int side = g.image_side;
    const int bins = g.detector_bins;
    const int n = g.pixels();
    const double source_dist = g.source_to_center;
    const double det_dist = g.center_to_detector;
    const double half = 0.5 * side;
    const double center = 0.5 * (side - 1);
    const double bin_center = 0.5 * (bins - 1);

    SparseOperator op;
    op.rows = angles.n_views() * bins;
    op.cols = n;

    std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
    std::vector<int> touched;
    touched.reserve(256);

    for (int v = 0; v < angles.n_views(); ++v) {
        const double beta = g.view_angle(angles.indices[static_cast<std::size_t>(v)]);
        const double cb = std::cos(beta);
        const double sb = std::sin(beta);
        // source and detector center on opposite sides of the isocenter
        const double sx = -source_dist * cb;
        const double sy = -source_dist * sb;
        const double cx_det = det_dist * cb;
        const double cy_det = det_dist * sb;
        // detector axis, perpendicular to the central ray
        const double ux = -sb;
        const double uy = cb;

        for (int t = 0; t < bins; ++t) {
            const int ray = v * bins + t;
            const double offset = (t - bin_center) * g.detector_spacing;
            const double px = cx_det + offset * ux;
            const double py = cy_det + offset * uy;
            double dx = px - sx;
            double dy = py - sy;
            const double len = std::hypot(dx, dy);
            dx /= len;
            dy /= len;

            double t0;
            double t1;
            if (!intersect_box(sx, sy, dx, dy, half, t0, t1)) {
                continue;
            }

            for (double s = t0 + 0.5; s < t1; s += 1.0) {
                const double qx = sx + s * dx;
                const double qy = sy + s * dy;
                const double gx = qx + center;
                const double gy = qy + center;
                const int i0 = static_cast<int>(std::floor(gx));
                const int j0 = static_cast<int>(std::floor(gy));
                const double fx = gx - i0;
                const double fy = gy - j0;
                const double w[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy),
                                     (1.0 - fx) * fy, fx * fy};
                const int cols[4] = {i0, i0 + 1, i0, i0 + 1};
                const int rows_[4] = {j0, j0, j0 + 1, j0 + 1};
                for (int k = 0; k < 4; ++k) {
                    const int ci = cols[k];
                    const int rj = rows_[k];
                    if (ci < 0 || ci >= side || rj < 0 || rj >= side ||
                        w[k] <= 0.0) {
                        continue;
                    }
                    const int pixel = rj * side + ci;
                    if (acc[static_cast<std::size_t>(pixel)] == 0.0) {
                        touched.push_back(pixel);
                    }
                    acc[static_cast<std::size_t>(pixel)] += w[k];
                }
            }

            std::sort(touched.begin(), touched.end());
            for (int pixel : touched) {
                const double value = acc[static_cast<std::size_t>(pixel)];
                if (value > 0.0) {
                    op.weights.push_back({ray, pixel, value});
                }
                acc[static_cast<std::size_t>(pixel)] = 0.0;
            }
            touched.clear();
        }
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(op.weights.size());
    for (const auto& w : op.weights) {
        triplets.emplace_back(w.ray, w.pixel, w.value);
    }
    op.matrix.resize(op.rows, op.cols);
    op.matrix.setFromTriplets(triplets.begin(), triplets.end());
    op.matrix.makeCompressed();
    return op;
}

SparseOperator make_operator(int rows, int cols,
                             std::vector<OperatorWeight> weights) {
    if (rows < 1 || cols < 1) {
        throw std::invalid_argument("make_operator: empty shape");
    }
    std::sort(weights.begin(), weights.end(),
              [](const OperatorWeight& a, const OperatorWeight& b) {
                  return a.ray != b.ray ? a.ray < b.ray : a.pixel < b.pixel;
              });
    SparseOperator op;
    op.rows = rows;
    op.cols = cols;
    for (const auto& w : weights) {
        if (w.ray < 0 || w.ray >= rows || w.pixel < 0 || w.pixel >= cols) {
            throw std::invalid_argument("make_operator: index out of range");
        }
        if (!std::isfinite(w.value) || w.value <= 0.0) {
            throw std::invalid_argument(
                "make_operator: weights must be finite and > 0");
        }
        if (!op.weights.empty() && op.weights.back().ray == w.ray &&
            op.weights.back().pixel == w.pixel) {
            op.weights.back().value += w.value;
        } else {
            op.weights.push_back(w);
        }
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(op.weights.size());
    for (const auto& w : op.weights) {
        triplets.emplace_back(w.ray, w.pixel, w.value);
    }
    op.matrix.resize(rows, cols);
    op.matrix.setFromTriplets(triplets.begin(), triplets.end());
    op.matrix.makeCompressed();
    return op;
}

Vec forward(const SparseOperator& op, const Vec& x) {
    if (x.size() != op.cols) {
        throw std::invalid_argument("forward: image has " +
                                    std::to_string(x.size()) +
                                    " pixels, operator expects " +
                                    std::to_string(op.cols));
    }
    return op.matrix * x;
}

Vec adjoint(const SparseOperator& op, const Vec& u) {
    if (u.size() != op.rows) {
        throw std::invalid_argument("adjoint: measurement has " +
                                    std::to_string(u.size()) +
                                    " entries, operator expects " +
                                    std::to_string(op.rows));
    }
    return op.matrix.transpose() * u;
}

double operator_norm_sq(const SparseOperator& op) {
    if (op.rows == 0 || op.cols == 0 || op.weights.empty()) {
        throw std::invalid_argument("operator_norm_sq: empty operator");
    }
    const int max_iters = 10000;
    const double rel_tol = 1e-6;

    // all-ones start cannot be orthogonal to the Perron eigenvector of A^T A
    Vec v = Vec::Ones(op.cols);
    v /= v.norm();
    double estimate = 0.0;
    for (int k = 0; k < max_iters; ++k) {
        Vec w = adjoint(op, forward(op, v));
        const double next = v.dot(w);
        const double wn = w.norm();
        if (wn == 0.0) {
            return 0.0;
        }
        v = w / wn;
        if (k > 0 && std::abs(next - estimate) <= rel_tol * next) {
            return next;
        }
        estimate = next;
    }
    throw PowerIterationError("operator_norm_sq: no convergence after " +
                                  std::to_string(max_iters) + " iterations",
                              estimate);
}

} // namespace lpnuq
