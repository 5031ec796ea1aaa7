#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "burnmap/errors.hpp"
#include "burnmap/numerics.hpp"

namespace burnmap {

/// Instrument envelope for band centers, nm.
constexpr double kLambdaMinNm = 350.0;
constexpr double kLambdaMaxNm = 2500.0;
/// Modeling range shared by both spectrometer setups, nm.
constexpr double kMergedLoNm = 400.0;
constexpr double kMergedHiNm = 2100.0;

/// Ordered band-center wavelengths (nm) for a cube's spectral axis.
/// Strictly increasing, finite, length >= 2, within [350, 2500] nm.
class WavelengthGrid {
public:
    explicit WavelengthGrid(std::vector<double> nm);
    static WavelengthGrid linspace(double lo_nm, double hi_nm, int bands);

    std::size_t size() const { return nm_.size(); }
    double operator[](std::size_t i) const { return nm_[i]; }
    const std::vector<double>& values() const { return nm_; }
    double front() const { return nm_.front(); }
    double back() const { return nm_.back(); }

    /// Index of the band center closest to `nm` (lowest index on ties).
    std::size_t nearest(double nm) const;
    /// Indices of bands with center in [lo, hi], inclusive.
    std::vector<std::size_t> in_range(double lo_nm, double hi_nm) const;

    bool operator==(const WavelengthGrid& o) const { return nm_ == o.nm_; }

private:
    std::vector<double> nm_;
};

enum class Quantity : std::uint8_t { Counts, Reflectance, Absorbance, Normalized };

std::string quantity_name(Quantity q);
Quantity quantity_from_name(const std::string& s);

/// rows x cols x bands volume, band-interleaved-by-pixel (each pixel's
/// spectrum contiguous). Pixels are row-major. Mask: 1 = tissue. Cubes are
/// immutable by convention: operations return new cubes.
struct HyperCube {
    int rows = 0;
    int cols = 0;
    WavelengthGrid grid;
    Quantity quantity = Quantity::Reflectance;
    std::vector<double> data;         // rows*cols*bands
    std::vector<std::uint8_t> mask;   // rows*cols
    std::vector<std::string> provenance;
    std::string config_hash;          // set by the pipeline, empty otherwise

    HyperCube(int rows_, int cols_, WavelengthGrid grid_, Quantity q);

    std::size_t bands() const { return grid.size(); }
    std::size_t n_pixels() const { return static_cast<std::size_t>(rows) * cols; }
    double* pixel(std::size_t p) { return data.data() + p * bands(); }
    const double* pixel(std::size_t p) const { return data.data() + p * bands(); }
    std::size_t pixel_index(int r, int c) const {
        return static_cast<std::size_t>(r) * cols + c;
    }
    bool is_tissue(std::size_t p) const { return mask[p] != 0; }
    std::size_t count_unmasked() const;

    /// Throws DataError if an invariant is violated (reflectance cubes must
    /// be non-negative; mask/data sizes must match dims).
    void validate() const;
};

/// rows x cols scalar field (DTWI, StO2, K, perfusion). Masked pixels hold
/// NaN; zero is a legal value and never used as a sentinel.
struct ScalarMap {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;       // rows*cols, NaN where masked
    std::vector<std::uint8_t> mask;   // rows*cols
    std::string name;
    std::string units;
    std::string config_hash;

    ScalarMap() = default;
    ScalarMap(int rows_, int cols_, std::string name_, std::string units_);

    std::size_t n_pixels() const { return static_cast<std::size_t>(rows) * cols; }
    void set(std::size_t p, double v) { values[p] = v; mask[p] = 1; }
    void set_masked(std::size_t p) { values[p] = kNaN; mask[p] = 0; }
    bool is_tissue(std::size_t p) const { return mask[p] != 0; }
};

/// rows x cols small integer class labels; labels < k on unmasked pixels.
struct LabelMap {
    int rows = 0;
    int cols = 0;
    int k = 0;
    std::vector<std::uint16_t> labels; // rows*cols
    std::vector<std::uint8_t> mask;    // rows*cols
    std::string config_hash;

    LabelMap() = default;
    LabelMap(int rows_, int cols_, int k_);

    std::size_t n_pixels() const { return static_cast<std::size_t>(rows) * cols; }
    bool is_tissue(std::size_t p) const { return mask[p] != 0; }
    void validate() const;
};

// ---- spectral-core operations ------------------------------------------

/// Per-pixel linear interpolation onto `target`. Requires the target range
/// to lie inside the source range. Quantity tag preserved.
HyperCube resample_to_grid(const HyperCube& cube, const WavelengthGrid& target);

/// Concatenate a VNIR and a SWIR cube onto one axis restricted to
/// [400, 2100] nm. Where the grids overlap the SWIR bands win (the SWIR
/// detector is in-band there). Requires identical spatial dims and masks.
HyperCube merge_cubes(const HyperCube& vnir, const HyperCube& swir);

/// Drop bands outside [lo, hi] (inclusive).
HyperCube crop_bands(const HyperCube& cube, double lo_nm, double hi_nm);

} // namespace burnmap
