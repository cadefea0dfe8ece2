#pragma once

#include "lpnuq/common.hpp"
#include "lpnuq/geometry.hpp"

namespace lpnuq {

struct FbpConfig {
    double cutoff = 1.0;       // ramp cutoff as a fraction of Nyquist
    bool fan_weighting = true; // cosine pre-weight and 1/U^2 distance weight
};

/// Filtered back-projection for the fan-beam geometry. The sinogram is
/// ray-major (view index times detector bins, plus bin). Returns a
/// side*side image on the unit pixel grid.
Vec fbp_reconstruct(const ScanGeometry& geom, const AngleSet& angles,
                    const Vec& sinogram, const FbpConfig& cfg = {});

} // namespace lpnuq
