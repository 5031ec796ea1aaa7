#pragma once

#include <string>
#include <vector>

#include "burnmap/types.hpp"

namespace burnmap {

/// A = -log10(max(R, 1e-6)); the floor keeps R = 0 finite (A = 6).
HyperCube absorbance(const HyperCube& reflectance);

constexpr double kAbsorbanceFloor = 1e-6;

/// Deep Tissue Water Index: normalized ratio of mean absorbance in the
/// 1150-1230 nm water band to the 1250-1350 nm band, anchored by the
/// empirical heuristics s1 (unburned) and s2 (full-thickness).
struct DtwiParams {
    double num_lo_nm = 1150.0;
    double num_hi_nm = 1230.0;
    double den_lo_nm = 1250.0;
    double den_hi_nm = 1350.0;
    double s1 = 1.0; // ratio anchor mapping to DTWI = 1
    double s2 = 0.0; // ratio anchor mapping to DTWI = 0

    void validate() const;
};

/// DTWI = clip((r - s2)/(s1 - s2), 0, 1) with r the window-mean ratio;
/// pixels whose denominator-window mean falls below 1e-9 are masked.
ScalarMap dtwi(const HyperCube& absorbance_cube, const DtwiParams& params);

/// Molar extinction coefficients for oxy/deoxyhemoglobin (cm^-1/M), shipped
/// as a versioned CSV asset; builtin() is the compiled-in copy of v1.
struct ExtinctionTable {
    std::vector<double> wavelength_nm;
    std::vector<double> eps_hbo2;
    std::vector<double> eps_hb;
    std::string version = "hb-extinction-v1";

    void validate() const; // positive, covers at least [500, 1000] nm
    double hbo2_at(double nm) const;
    double hb_at(double nm) const;
    void save_csv(const std::string& path) const;
    static ExtinctionTable load_csv(const std::string& path);
    static ExtinctionTable builtin();
};

/// StO2 via modified Beer-Lambert: non-negative least squares of
/// A(lambda) ~ c1*eps_HbO2 + c2*eps_Hb + c3 over the fit window;
/// StO2 = c1/(c1+c2) clipped to [0,1]; c1+c2 < 1e-9 masks the pixel.
ScalarMap sto2(const HyperCube& absorbance_cube, const ExtinctionTable& table,
               double fit_lo_nm, double fit_hi_nm);

/// Savitzky-Golay derivative along the spectral axis in units per nm,
/// computed on the true wavelength spacing. order in {1, 2}.
HyperCube spectral_derivative(const HyperCube& cube, int order, int window,
                              int polyorder);

} // namespace burnmap
