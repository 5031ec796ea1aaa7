#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "burnmap/savgol.hpp"
#include "burnmap/types.hpp"

namespace burnmap {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// y = A*x + t in pixel coordinates (x = column, y = row).
struct AffineTransform2D {
    std::array<std::array<double, 2>, 2> a{{{1.0, 0.0}, {0.0, 1.0}}};
    std::array<double, 2> t{0.0, 0.0};

    Point2 apply(Point2 p) const {
        return {a[0][0] * p.x + a[0][1] * p.y + t[0],
                a[1][0] * p.x + a[1][1] * p.y + t[1]};
    }
    double det() const { return a[0][0] * a[1][1] - a[0][1] * a[1][0]; }
    AffineTransform2D inverse() const;
    static AffineTransform2D identity() { return {}; }
};

/// Least-squares affine from >= 3 non-collinear point pairs.
AffineTransform2D fit_affine(std::span<const Point2> src, std::span<const Point2> dst);

/// Point pairs as CSV with columns src_x,src_y,dst_x,dst_y.
std::pair<std::vector<Point2>, std::vector<Point2>> load_point_pairs_csv(
    const std::string& path);

/// Inverse-mapped resampling into the destination frame: bilinear for scalar
/// maps, nearest for labels. Out-of-bounds or masked sources become masked.
ScalarMap warp_map(const ScalarMap& map, const AffineTransform2D& transform);
LabelMap warp_map(const LabelMap& map, const AffineTransform2D& transform);

/// Masks pixels whose mean reflectance over 400-900 nm falls outside
/// [lo, hi]; the result mask is intersected with the existing one.
HyperCube mask_background(const HyperCube& cube, double lo, double hi);

/// Savitzky-Golay smoothing along the spectral axis.
HyperCube smooth_spectra(const HyperCube& cube, int window, int polyorder);
HyperCube smooth_spectra(const HyperCube& cube,
                         const std::vector<SavgolPlan::Region>& regions);

/// Per-pixel L2 normalization; zero-norm pixels become masked (they carry no
/// direction for cosine-based methods).
HyperCube l2_normalize(const HyperCube& cube);

/// Per-band Z-score over unmasked pixels (population std, pairwise
/// summation); zero-std bands are set to 0.
HyperCube zscore_bands(const HyperCube& cube);

} // namespace burnmap
