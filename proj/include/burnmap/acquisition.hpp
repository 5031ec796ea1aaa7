#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "burnmap/types.hpp"

namespace burnmap {

/// Serpentine raster plan over a rectangular region. Spot centers are spaced
/// by spot*(1-overlap); position count is ceil(w/step)*ceil(h/step).
struct RasterPlan {
    double origin_x_mm = 0.0;
    double origin_y_mm = 0.0;
    double width_mm = 0.0;
    double height_mm = 0.0;
    double spot_mm = 0.0;
    double overlap = 0.0;
    double dwell_s = 0.1;
    int nx = 0;
    int ny = 0;
    std::string order = "serpentine";
    std::vector<std::array<double, 2>> positions_mm;

    std::size_t count() const { return positions_mm.size(); }
    /// Acquisition index of grid cell (row, col) under serpentine traversal.
    std::size_t index_of(int row, int col) const;
    double dwell_midpoint_s(std::size_t index) const {
        return (static_cast<double>(index) + 0.5) * dwell_s;
    }
    double duration_s() const { return static_cast<double>(count()) * dwell_s; }

    std::string to_json() const;
    static RasterPlan from_json(const std::string& text);
};

RasterPlan plan_raster(double width_mm, double height_mm, double spot_mm,
                       double overlap, double dwell_s, double origin_x_mm = 0.0,
                       double origin_y_mm = 0.0);

/// Dark/white calibration references; white > dark on every band.
struct ReferencePair {
    std::vector<double> wavelengths_nm;
    std::vector<double> dark;
    std::vector<double> white;

    void validate() const;
    void save_csv(const std::string& path) const;
    static ReferencePair load_csv(const std::string& path);
};

/// Time-of-flight range log at 10 Hz plus the reference standoff distance.
struct TofLog {
    std::vector<double> timestamp_s;
    std::vector<double> distance_mm;
    double d_ref_mm = 150.0;

    static constexpr double kRailLimitMm = 20.0; // +-2 cm z-axis rail
    static constexpr double kMaxGapS = 0.2;

    void validate() const;
    void save_csv(const std::string& path) const;
    static TofLog load_csv(const std::string& path);
};

enum class BurnClass : std::uint16_t {
    Unburned = 0,
    Superficial = 1,
    DeepPartial = 2,
    FullThickness = 3,
};
constexpr int kBurnClasses = 4;
const char* burn_class_name(BurnClass c);

/// Dimensionless chromophore weights for one burn class.
struct ClassWeights {
    double water = 0.0;
    double hbo2 = 0.0;
    double hb = 0.0;
    double lipid = 0.0;
    double collagen = 0.0;
};

/// Burn severity monotonically lowers water and oxyhemoglobin and raises
/// collagen (denatured matrix dominates deep injuries).
std::array<ClassWeights, kBurnClasses> default_class_weights();

struct GaussianLobe {
    double center_nm;
    double sigma_nm;
    double amplitude;
};

/// Absorption lobes per chromophore; centers are repo constants documented
/// in the README (water 970/1200/1450/1940, HbO2 540/577, Hb 760,
/// lipid 930/1210, collagen 1500/2050 nm).
const std::vector<GaussianLobe>& water_lobes();
const std::vector<GaussianLobe>& hbo2_lobes();
const std::vector<GaussianLobe>& hb_lobes();
const std::vector<GaussianLobe>& lipid_lobes();
const std::vector<GaussianLobe>& collagen_lobes();

/// Total absorption strength at one wavelength for a weight set.
double phantom_absorption(const ClassWeights& w, double lambda_nm);

struct FiducialSquare {
    int row = 0;
    int col = 0;
    int size = 3;
};

struct Breathing {
    double amplitude_mm = 0.0;
    double period_s = 5.0;
};

/// Ground-truth phantom description: class layout, chromophore weights,
/// seeded noise, breathing motion for the scan simulator.
struct PhantomSpec {
    int rows = 40;
    int cols = 40;
    double grid_lo_nm = 400.0;
    double grid_hi_nm = 2100.0;
    int grid_bands = 341;
    std::string layout = "quadrants"; // quadrants | stripes | custom
    std::vector<std::uint16_t> custom_layout;
    std::array<ClassWeights, kBurnClasses> weights = default_class_weights();
    double noise_std = 0.01;
    std::vector<FiducialSquare> fiducials;
    Breathing breathing;
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
    static PhantomSpec from_json(const std::string& text);
};

struct Phantom {
    HyperCube truth;   // reflectance
    LabelMap labels;
};

/// R(lambda) = exp(-sum_c w_c * G_c(lambda)) plus seeded Gaussian noise,
/// clamped non-negative. Fiducial squares are painted near-black.
Phantom generate_phantom(const PhantomSpec& spec);

struct ScanResult {
    HyperCube raw; // digital counts
    ReferencePair refs;
    TofLog tof;
};

/// counts = dark + R*(white-dark)*(d_ref/d(t))^2 with
/// d(t) = d_ref + A*sin(2*pi*t/period) sampled at each dwell midpoint.
/// The ToF log records d(t) at 10 Hz over the scan.
ScanResult simulate_scan(const HyperCube& truth, const RasterPlan& plan,
                         const PhantomSpec& spec, double d_ref_mm = 150.0);

/// Scales counts-above-dark by (d(t_p)/d_ref)^2 using the log sample nearest
/// each pixel's dwell midpoint; inverts the simulator's distance attenuation.
HyperCube tof_compensate(const HyperCube& raw, const TofLog& tof,
                         const RasterPlan& plan, const ReferencePair& refs);

/// R = (raw - dark) / (white - dark), clamped at 0.
HyperCube counts_to_reflectance(const HyperCube& raw, const ReferencePair& refs);

/// Repo-constant reference curves used by the simulated instrument.
ReferencePair make_references(const WavelengthGrid& grid);

} // namespace burnmap
