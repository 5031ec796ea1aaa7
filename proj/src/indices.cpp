#include "burnmap/indices.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "burnmap/io.hpp"
#include "burnmap/savgol.hpp"

namespace burnmap {

HyperCube absorbance(const HyperCube& reflectance) {
    if (reflectance.quantity != Quantity::Reflectance)
        throw DataError("absorbance expects a reflectance cube");
    HyperCube out(reflectance.rows, reflectance.cols, reflectance.grid,
                  Quantity::Absorbance);
    out.mask = reflectance.mask;
    out.provenance = reflectance.provenance;
    out.provenance.push_back("absorbance");
    out.config_hash = reflectance.config_hash;
    const std::size_t n = reflectance.data.size();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        out.data[i] = -std::log10(std::max(reflectance.data[i], kAbsorbanceFloor));
    return out;
}

void DtwiParams::validate() const {
    if (!(num_lo_nm < num_hi_nm) || !(den_lo_nm < den_hi_nm))
        throw DataError("dtwi: window bounds must be increasing");
    if (!(s1 > s2)) throw DataError("dtwi: need s1 > s2");
}

ScalarMap dtwi(const HyperCube& absorbance_cube, const DtwiParams& params) {
    params.validate();
    if (absorbance_cube.quantity != Quantity::Absorbance)
        throw DataError("dtwi expects an absorbance cube");
    const auto num_idx = absorbance_cube.grid.in_range(params.num_lo_nm, params.num_hi_nm);
    const auto den_idx = absorbance_cube.grid.in_range(params.den_lo_nm, params.den_hi_nm);
    if (num_idx.empty() || den_idx.empty())
        throw DataError("dtwi: a band window lies outside the grid");

    ScalarMap out(absorbance_cube.rows, absorbance_cube.cols, "dtwi", "index");
    out.config_hash = absorbance_cube.config_hash;
    const std::size_t np = absorbance_cube.n_pixels();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        if (!absorbance_cube.is_tissue(p)) {
            out.set_masked(p);
            continue;
        }
        const double* s = absorbance_cube.pixel(p);
        double num = 0.0, den = 0.0;
        for (const auto b : num_idx) num += s[b];
        for (const auto b : den_idx) den += s[b];
        num /= static_cast<double>(num_idx.size());
        den /= static_cast<double>(den_idx.size());
        if (den < 1e-9) {
            out.set_masked(p);
            continue;
        }
        const double r = num / den;
        out.set(p, std::clamp((r - params.s2) / (params.s1 - params.s2), 0.0, 1.0));
    }
    return out;
}

// ---- extinction table ----------------------------------------------------

void ExtinctionTable::validate() const {
    if (wavelength_nm.size() != eps_hbo2.size() ||
        wavelength_nm.size() != eps_hb.size() || wavelength_nm.size() < 2)
        throw DataError("extinction table: bad column sizes");
    for (std::size_t i = 0; i < wavelength_nm.size(); ++i) {
        if (i > 0 && wavelength_nm[i] <= wavelength_nm[i - 1])
            throw DataError("extinction table: wavelengths not increasing");
        if (!(eps_hbo2[i] > 0.0) || !(eps_hb[i] > 0.0))
            throw DataError("extinction table: coefficients must be positive");
    }
    if (wavelength_nm.front() > 500.0 || wavelength_nm.back() < 1000.0)
        throw DataError("extinction table must cover at least [500, 1000] nm");
}

namespace {

double interp_column(const std::vector<double>& xs, const std::vector<double>& ys,
                     double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    const std::size_t lo = hi - 1;
    const double a = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + a * (ys[hi] - ys[lo]);
}

} // namespace

double ExtinctionTable::hbo2_at(double nm) const {
    return interp_column(wavelength_nm, eps_hbo2, nm);
}
double ExtinctionTable::hb_at(double nm) const {
    return interp_column(wavelength_nm, eps_hb, nm);
}

void ExtinctionTable::save_csv(const std::string& path) const {
    std::vector<std::vector<double>> rows(wavelength_nm.size());
    for (std::size_t i = 0; i < wavelength_nm.size(); ++i)
        rows[i] = {wavelength_nm[i], eps_hbo2[i], eps_hb[i]};
    write_csv(path, "wavelength_nm,eps_hbo2,eps_hb", rows, {version});
}

ExtinctionTable ExtinctionTable::load_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    if (t.columns.size() != 3)
        throw DataError("extinction csv needs columns wavelength_nm,eps_hbo2,eps_hb");
    ExtinctionTable e;
    if (!t.preamble.empty()) e.version = t.preamble.front();
    for (const auto& row : t.rows) {
        e.wavelength_nm.push_back(row[0]);
        e.eps_hbo2.push_back(row[1]);
        e.eps_hb.push_back(row[2]);
    }
    e.validate();
    return e;
}

ExtinctionTable ExtinctionTable::builtin() {
    // Smooth analytic stand-in with the qualitative shape of the hemoglobin
    // spectra: HbO2 peaks at 542/577 nm, Hb at 556 and 760 nm, near-crossings
    // around the isosbestic region. Values in nominal cm^-1/M * 1e-3.
    ExtinctionTable e;
    auto lobe = [](double lam, double c, double s, double a) {
        const double t = (lam - c) / s;
        return a * std::exp(-0.5 * t * t);
    };
    for (int i = 0; i <= 275; ++i) {
        const double lam = 450.0 + 2.0 * i;
        const double o2 = 25.0 + lobe(lam, 542.0, 22.0, 320.0) +
                          lobe(lam, 577.0, 16.0, 300.0) + lobe(lam, 925.0, 90.0, 60.0);
        const double hb = 30.0 + lobe(lam, 556.0, 26.0, 340.0) +
                          lobe(lam, 760.0, 42.0, 130.0) + lobe(lam, 910.0, 110.0, 35.0);
        e.wavelength_nm.push_back(lam);
        e.eps_hbo2.push_back(o2);
        e.eps_hb.push_back(hb);
    }
    e.validate();
    return e;
}

// ---- StO2 ----------------------------------------------------------------

ScalarMap sto2(const HyperCube& absorbance_cube, const ExtinctionTable& table,
               double fit_lo_nm, double fit_hi_nm) {
    table.validate();
    if (absorbance_cube.quantity != Quantity::Absorbance)
        throw DataError("sto2 expects an absorbance cube");
    if (fit_lo_nm < table.wavelength_nm.front() || fit_hi_nm > table.wavelength_nm.back())
        throw DataError("sto2: fit window outside extinction table range");
    const auto idx = absorbance_cube.grid.in_range(fit_lo_nm, fit_hi_nm);
    if (idx.size() < 3) throw DataError("sto2: fit window needs >= 3 bands");

    const int nb = static_cast<int>(idx.size());
    Eigen::MatrixXd V(nb, 3);
    for (int j = 0; j < nb; ++j) {
        const double lam = absorbance_cube.grid[idx[j]];
        V(j, 0) = table.hbo2_at(lam);
        V(j, 1) = table.hb_at(lam);
        V(j, 2) = 1.0;
    }
    {
        const Eigen::Matrix3d gram = V.transpose() * V;
        Eigen::FullPivLU<Eigen::Matrix3d> lu(gram);
        lu.setThreshold(1e-12);
        if (lu.rank() < 3)
            throw NumericError("sto2: rank-deficient design (extinction table "
                               "degenerate on fit window)");
    }

    // Exhaustive active-set NNLS: with 3 variables, solve the unconstrained
    // least squares on every support and keep the feasible candidate with the
    // smallest residual. The optimum's own support always appears, so this is
    // exact.
    struct Subset {
        std::array<int, 3> vars;
        int count;
        Eigen::Matrix3d ginv; // top-left count x count block valid
    };
    std::vector<Subset> subsets;
    for (int bits = 1; bits < 8; ++bits) {
        Subset s{};
        s.count = 0;
        for (int v = 0; v < 3; ++v)
            if (bits & (1 << v)) s.vars[s.count++] = v;
        Eigen::MatrixXd G(s.count, s.count);
        for (int a = 0; a < s.count; ++a)
            for (int b = 0; b < s.count; ++b)
                G(a, b) = V.col(s.vars[a]).dot(V.col(s.vars[b]));
        Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
        if (lu.rank() < s.count) continue; // degenerate support, skip
        const Eigen::MatrixXd inv = lu.inverse();
        s.ginv.setZero();
        s.ginv.topLeftCorner(s.count, s.count) = inv;
        subsets.push_back(s);
    }

    ScalarMap out(absorbance_cube.rows, absorbance_cube.cols, "sto2", "fraction");
    out.config_hash = absorbance_cube.config_hash;
    const std::size_t np = absorbance_cube.n_pixels();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        if (!absorbance_cube.is_tissue(p)) {
            out.set_masked(p);
            continue;
        }
        const double* spec = absorbance_cube.pixel(p);
        Eigen::Vector3d vty = Eigen::Vector3d::Zero();
        double yty = 0.0;
        for (int j = 0; j < nb; ++j) {
            const double y = spec[idx[j]];
            yty += y * y;
            vty(0) += V(j, 0) * y;
            vty(1) += V(j, 1) * y;
            vty(2) += V(j, 2) * y;
        }

        double best_res = yty; // empty support: c = 0
        Eigen::Vector3d best_c = Eigen::Vector3d::Zero();
        for (const auto& s : subsets) {
            Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
            for (int a = 0; a < s.count; ++a) rhs(a) = vty(s.vars[a]);
            Eigen::Vector3d sol = s.ginv * rhs;
            bool feasible = true;
            double res = yty;
            for (int a = 0; a < s.count; ++a) {
                if (sol(a) < 0.0) {
                    feasible = false;
                    break;
                }
                res -= sol(a) * rhs(a);
            }
            if (!feasible) continue;
            if (res < best_res - 1e-15 * std::max(1.0, yty)) {
                best_res = res;
                best_c.setZero();
                for (int a = 0; a < s.count; ++a) best_c(s.vars[a]) = sol(a);
            }
        }

        const double total = best_c(0) + best_c(1);
        if (total < 1e-9) {
            out.set_masked(p);
            continue;
        }
        out.set(p, std::clamp(best_c(0) / total, 0.0, 1.0));
    }
    return out;
}

HyperCube spectral_derivative(const HyperCube& cube, int order, int window,
                              int polyorder) {
    if (order < 1 || order > 2)
        throw DataError("spectral_derivative: order must be 1 or 2");
    const SavgolPlan plan = SavgolPlan::build(cube.grid, window, polyorder, order);
    HyperCube out(cube.rows, cube.cols, cube.grid, Quantity::Normalized);
    out.mask = cube.mask;
    out.provenance = cube.provenance;
    out.provenance.push_back("spectral_derivative_" + std::to_string(order));
    out.config_hash = cube.config_hash;
    const std::size_t np = cube.n_pixels();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p)
        plan.apply(cube.pixel(p), out.pixel(p));
    return out;
}

} // namespace burnmap
