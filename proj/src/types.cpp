#include "burnmap/types.hpp"

#include <algorithm>
#include <cmath>

namespace burnmap {

WavelengthGrid::WavelengthGrid(std::vector<double> nm) : nm_(std::move(nm)) {
    // Acquisition grids always carry >= 2 bands; single-band grids are legal
    // for derived band subsets (interpolation ops enforce >= 2 themselves).
    if (nm_.empty()) throw DataError("wavelength grid is empty");
    for (std::size_t i = 0; i < nm_.size(); ++i) {
        if (!std::isfinite(nm_[i]))
            throw DataError("wavelength grid contains non-finite value");
        if (nm_[i] < kLambdaMinNm || nm_[i] > kLambdaMaxNm)
            throw DataError("wavelength " + std::to_string(nm_[i]) +
                            " nm outside instrument envelope [350, 2500]");
        if (i > 0 && nm_[i] <= nm_[i - 1])
            throw DataError("wavelength grid not strictly increasing at index " +
                            std::to_string(i));
    }
}

WavelengthGrid WavelengthGrid::linspace(double lo_nm, double hi_nm, int bands) {
    if (bands < 2) throw DataError("linspace grid needs at least 2 bands");
    if (!(lo_nm < hi_nm)) throw DataError("linspace needs lo < hi");
    std::vector<double> v(bands);
    for (int i = 0; i < bands; ++i)
        v[i] = lo_nm + (hi_nm - lo_nm) * static_cast<double>(i) / (bands - 1);
    return WavelengthGrid(std::move(v));
}

std::size_t WavelengthGrid::nearest(double nm) const {
    auto it = std::lower_bound(nm_.begin(), nm_.end(), nm);
    if (it == nm_.begin()) return 0;
    if (it == nm_.end()) return nm_.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - nm_.begin());
    const std::size_t lo = hi - 1;
    return (nm - nm_[lo] <= nm_[hi] - nm) ? lo : hi;
}

std::vector<std::size_t> WavelengthGrid::in_range(double lo_nm, double hi_nm) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < nm_.size(); ++i)
        if (nm_[i] >= lo_nm && nm_[i] <= hi_nm) idx.push_back(i);
    return idx;
}

std::string quantity_name(Quantity q) {
    switch (q) {
        case Quantity::Counts: return "counts";
        case Quantity::Reflectance: return "reflectance";
        case Quantity::Absorbance: return "absorbance";
        case Quantity::Normalized: return "normalized";
    }
    return "unknown";
}

Quantity quantity_from_name(const std::string& s) {
    if (s == "counts") return Quantity::Counts;
    if (s == "reflectance") return Quantity::Reflectance;
    if (s == "absorbance") return Quantity::Absorbance;
    if (s == "normalized") return Quantity::Normalized;
    throw ConfigError("unknown quantity tag: " + s);
}

HyperCube::HyperCube(int rows_, int cols_, WavelengthGrid grid_, Quantity q)
    : rows(rows_), cols(cols_), grid(std::move(grid_)), quantity(q) {
    if (rows <= 0 || cols <= 0) throw DataError("cube dims must be positive");
    data.assign(n_pixels() * bands(), 0.0);
    mask.assign(n_pixels(), 1);
}

std::size_t HyperCube::count_unmasked() const {
    std::size_t n = 0;
    for (auto m : mask) n += (m != 0);
    return n;
}

void HyperCube::validate() const {
    if (data.size() != n_pixels() * bands())
        throw DataError("cube data size does not match dims");
    if (mask.size() != n_pixels())
        throw DataError("cube mask size does not match dims");
    if (quantity == Quantity::Reflectance) {
        for (std::size_t p = 0; p < n_pixels(); ++p) {
            if (!is_tissue(p)) continue;
            const double* s = pixel(p);
            for (std::size_t b = 0; b < bands(); ++b)
                if (s[b] < 0.0)
                    throw DataError("negative reflectance at pixel " + std::to_string(p));
        }
    }
}

ScalarMap::ScalarMap(int rows_, int cols_, std::string name_, std::string units_)
    : rows(rows_), cols(cols_), name(std::move(name_)), units(std::move(units_)) {
    if (rows <= 0 || cols <= 0) throw DataError("map dims must be positive");
    values.assign(n_pixels(), kNaN);
    mask.assign(n_pixels(), 0);
}

LabelMap::LabelMap(int rows_, int cols_, int k_) : rows(rows_), cols(cols_), k(k_) {
    if (rows <= 0 || cols <= 0) throw DataError("map dims must be positive");
    if (k <= 0) throw DataError("label map needs k > 0");
    labels.assign(n_pixels(), 0);
    mask.assign(n_pixels(), 1);
}

void LabelMap::validate() const {
    for (std::size_t p = 0; p < n_pixels(); ++p)
        if (is_tissue(p) && labels[p] >= k)
            throw DataError("label >= k at pixel " + std::to_string(p));
}

HyperCube resample_to_grid(const HyperCube& cube, const WavelengthGrid& target) {
    const auto& src = cube.grid.values();
    if (src.size() < 2)
        throw DataError("resample source grid needs at least 2 bands");
    if (target.front() < src.front() || target.back() > src.back())
        throw DataError("resample target range extends beyond source range");

    const std::size_t tb = target.size();
    // Per-target-band segment index and interpolation weight, shared by all
    // pixels.
    std::vector<std::size_t> seg(tb);
    std::vector<double> frac(tb);
    for (std::size_t j = 0; j < tb; ++j) {
        const double lam = target[j];
        auto it = std::upper_bound(src.begin(), src.end(), lam);
        std::size_t hi = static_cast<std::size_t>(it - src.begin());
        if (hi == 0) hi = 1;
        if (hi == src.size()) hi = src.size() - 1;
        const std::size_t lo = hi - 1;
        seg[j] = lo;
        const double den = src[hi] - src[lo];
        double a = (lam - src[lo]) / den;
        if (a < 0.0) a = 0.0;
        if (a > 1.0) a = 1.0;
        frac[j] = a;
    }

    HyperCube out(cube.rows, cube.cols, target, cube.quantity);
    out.mask = cube.mask;
    out.provenance = cube.provenance;
    out.provenance.push_back("resample_to_grid");
    out.config_hash = cube.config_hash;

    const std::size_t np = cube.n_pixels();
    const std::size_t sb = cube.bands();
    (void)sb;
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        const double* in = cube.pixel(p);
        double* o = out.pixel(p);
        for (std::size_t j = 0; j < tb; ++j) {
            const std::size_t lo = seg[j];
            const double a = frac[j];
            // Exact grid hits reproduce the source value bit-for-bit.
            o[j] = (a == 0.0) ? in[lo]
                 : (a == 1.0) ? in[lo + 1]
                              : in[lo] + a * (in[lo + 1] - in[lo]);
        }
    }
    return out;
}

HyperCube merge_cubes(const HyperCube& vnir, const HyperCube& swir) {
    if (vnir.rows != swir.rows || vnir.cols != swir.cols)
        throw DataError("merge_cubes: spatial dims differ");
    if (vnir.mask != swir.mask)
        throw DataError("merge_cubes: masks differ");
    if (vnir.quantity != swir.quantity)
        throw DataError("merge_cubes: quantity tags differ");
    if (swir.grid.front() <= vnir.grid.front())
        throw DataError("merge_cubes: swir grid must extend above vnir");

    const double swir_lo = swir.grid.front();
    // VNIR bands strictly below the SWIR range survive; SWIR wins overlaps.
    std::vector<std::size_t> vsel, ssel;
    std::vector<double> merged;
    for (std::size_t i = 0; i < vnir.bands(); ++i) {
        const double lam = vnir.grid[i];
        if (lam >= swir_lo) break;
        if (lam < kMergedLoNm || lam > kMergedHiNm) continue;
        vsel.push_back(i);
        merged.push_back(lam);
    }
    for (std::size_t i = 0; i < swir.bands(); ++i) {
        const double lam = swir.grid[i];
        if (lam < kMergedLoNm || lam > kMergedHiNm) continue;
        ssel.push_back(i);
        merged.push_back(lam);
    }
    if (merged.size() < 2)
        throw DataError("merge_cubes: fewer than 2 bands inside [400, 2100] nm");

    HyperCube out(vnir.rows, vnir.cols, WavelengthGrid(std::move(merged)),
                  vnir.quantity);
    out.mask = vnir.mask;
    out.provenance = vnir.provenance;
    for (const auto& s : swir.provenance) out.provenance.push_back(s);
    out.provenance.push_back("merge_cubes");
    out.config_hash = vnir.config_hash;

    const std::size_t np = out.n_pixels();
    const std::size_t nv = vsel.size();
    const std::size_t ns = ssel.size();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        const double* v = vnir.pixel(p);
        const double* s = swir.pixel(p);
        double* o = out.pixel(p);
        for (std::size_t j = 0; j < nv; ++j) o[j] = v[vsel[j]];
        for (std::size_t j = 0; j < ns; ++j) o[nv + j] = s[ssel[j]];
    }
    return out;
}

HyperCube crop_bands(const HyperCube& cube, double lo_nm, double hi_nm) {
    if (!(lo_nm < hi_nm)) throw DataError("crop_bands: lo must be < hi");
    const auto idx = cube.grid.in_range(lo_nm, hi_nm);
    if (idx.empty())
        throw DataError("crop_bands: no bands in [" + std::to_string(lo_nm) +
                        ", " + std::to_string(hi_nm) + "]");

    std::vector<double> nm(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) nm[j] = cube.grid[idx[j]];

    HyperCube out(cube.rows, cube.cols, WavelengthGrid(std::move(nm)), cube.quantity);
    out.mask = cube.mask;
    out.provenance = cube.provenance;
    out.provenance.push_back("crop_bands");
    out.config_hash = cube.config_hash;

    const std::size_t np = cube.n_pixels();
    const std::size_t nb = idx.size();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        const double* in = cube.pixel(p);
        double* o = out.pixel(p);
        for (std::size_t j = 0; j < nb; ++j) o[j] = in[idx[j]];
    }
    return out;
}

} // namespace burnmap
