#pragma once

#include <vector>

#include "burnmap/lsci.hpp"
#include "burnmap/types.hpp"

namespace burnmap::ref {

// Plain serial implementations of the hot kernels, written along different
// routes than the OpenMP versions (direct scans instead of precomputed
// tables, naive window enumeration instead of integral images). Tests use
// them as independent oracles; the bench tool compares their runtime against
// the parallel kernels.

/// Piecewise-linear evaluation by scanning segments.
double interp_linear(const std::vector<double>& xs, const std::vector<double>& ys,
                     double x);

HyperCube resample_cube(const HyperCube& cube, const WavelengthGrid& target);

/// Per-pixel per-band local polynomial fit solved from scratch.
HyperCube savgol_smooth(const HyperCube& cube, int window, int polyorder);

ScalarMap temporal_contrast(const FrameStack& stack);

/// Direct window enumeration.
ScalarMap spatial_contrast(const FrameStack& stack, int window);

std::vector<double> cosine_affinity(const std::vector<double>& data, int n, int d);

HyperCube l2_normalize(const HyperCube& cube);
HyperCube zscore_bands(const HyperCube& cube);

} // namespace burnmap::ref
