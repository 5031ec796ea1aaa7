#pragma once

#include <cstddef>
#include <vector>

#include "burnmap/types.hpp"

namespace burnmap {

/// Precomputed moving least-squares (Savitzky-Golay) weights for one grid.
/// Works on the true wavelength spacing; near the edges the window shrinks
/// to the bands that exist and the polynomial order drops to min(polyorder,
/// window_len - 1), which keeps low-degree polynomials exact everywhere.
struct SavgolPlan {
    int window = 0;
    int polyorder = 0;
    int deriv = 0;
    std::vector<int> start;           // first band of each window
    std::vector<int> len;             // window length per band
    std::vector<std::size_t> offset;  // into weights
    std::vector<double> weights;

    static SavgolPlan build(const WavelengthGrid& grid, int window, int polyorder,
                            int deriv);

    /// out[i] = sum_j weights[i][j] * in[start[i]+j]; out and in may not alias.
    void apply(const double* in, double* out) const;

    /// Per-band window table variant; each band uses the parameters of the
    /// first region containing its wavelength, or passes through unchanged.
    struct Region {
        double lo_nm;
        double hi_nm;
        int window;
        int polyorder;
    };
    static SavgolPlan build_regions(const WavelengthGrid& grid,
                                    const std::vector<Region>& regions);
};

} // namespace burnmap
