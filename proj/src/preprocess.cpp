#include "burnmap/preprocess.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "burnmap/io.hpp"

namespace burnmap {

AffineTransform2D AffineTransform2D::inverse() const {
    const double d = det();
    if (std::fabs(d) <= 1e-9)
        throw NumericError("affine transform is singular");
    AffineTransform2D inv;
    inv.a[0][0] = a[1][1] / d;
    inv.a[0][1] = -a[0][1] / d;
    inv.a[1][0] = -a[1][0] / d;
    inv.a[1][1] = a[0][0] / d;
    inv.t[0] = -(inv.a[0][0] * t[0] + inv.a[0][1] * t[1]);
    inv.t[1] = -(inv.a[1][0] * t[0] + inv.a[1][1] * t[1]);
    return inv;
}

AffineTransform2D fit_affine(std::span<const Point2> src, std::span<const Point2> dst) {
    if (src.size() != dst.size())
        throw DataError("fit_affine: point lists differ in length");
    const std::size_t n = src.size();
    if (n < 3) throw DataError("fit_affine: need at least 3 point pairs");

    Eigen::MatrixXd M(n, 3);
    Eigen::VectorXd bx(n), by(n);
    for (std::size_t i = 0; i < n; ++i) {
        M(i, 0) = src[i].x;
        M(i, 1) = src[i].y;
        M(i, 2) = 1.0;
        bx(i) = dst[i].x;
        by(i) = dst[i].y;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M.transpose() * M);
    lu.setThreshold(1e-9);
    if (lu.rank() < 3)
        throw NumericError("fit_affine: degenerate fit (collinear points)");
    const Eigen::VectorXd cx = lu.solve(M.transpose() * bx);
    const Eigen::VectorXd cy = lu.solve(M.transpose() * by);

    AffineTransform2D T;
    T.a[0][0] = cx(0);
    T.a[0][1] = cx(1);
    T.t[0] = cx(2);
    T.a[1][0] = cy(0);
    T.a[1][1] = cy(1);
    T.t[1] = cy(2);
    if (std::fabs(T.det()) <= 1e-9)
        throw NumericError("fit_affine: fitted transform is singular");
    return T;
}

std::pair<std::vector<Point2>, std::vector<Point2>> load_point_pairs_csv(
    const std::string& path) {
    const CsvTable t = read_csv(path);
    if (t.columns.size() != 4)
        throw DataError("point pair csv needs columns src_x,src_y,dst_x,dst_y");
    std::vector<Point2> src, dst;
    for (const auto& row : t.rows) {
        src.push_back({row[0], row[1]});
        dst.push_back({row[2], row[3]});
    }
    return {src, dst};
}

ScalarMap warp_map(const ScalarMap& map, const AffineTransform2D& transform) {
    const AffineTransform2D inv = transform.inverse();
    ScalarMap out(map.rows, map.cols, map.name, map.units);
    out.config_hash = map.config_hash;
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(out.n_pixels()); ++p) {
        const int r = static_cast<int>(p) / map.cols;
        const int c = static_cast<int>(p) % map.cols;
        const Point2 s = inv.apply({static_cast<double>(c), static_cast<double>(r)});
        const double fx = std::floor(s.x);
        const double fy = std::floor(s.y);
        int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        double wx = s.x - fx, wy = s.y - fy;
        // Exact hits on the last row/column are still in bounds.
        if (x0 == map.cols - 1 && wx == 0.0 && x0 > 0) { x0 -= 1; wx = 1.0; }
        if (y0 == map.rows - 1 && wy == 0.0 && y0 > 0) { y0 -= 1; wy = 1.0; }
        if (x0 < 0 || y0 < 0 || x0 + 1 >= map.cols || y0 + 1 >= map.rows) {
            out.set_masked(p);
            continue;
        }
        const std::size_t i00 = static_cast<std::size_t>(y0) * map.cols + x0;
        const std::size_t i01 = i00 + 1;
        const std::size_t i10 = i00 + map.cols;
        const std::size_t i11 = i10 + 1;
        if (!map.is_tissue(i00) || !map.is_tissue(i01) || !map.is_tissue(i10) ||
            !map.is_tissue(i11)) {
            out.set_masked(p);
            continue;
        }
        const double v0 = map.values[i00] * (1.0 - wx) + map.values[i01] * wx;
        const double v1 = map.values[i10] * (1.0 - wx) + map.values[i11] * wx;
        out.set(p, v0 * (1.0 - wy) + v1 * wy);
    }
    return out;
}

LabelMap warp_map(const LabelMap& map, const AffineTransform2D& transform) {
    const AffineTransform2D inv = transform.inverse();
    LabelMap out(map.rows, map.cols, map.k);
    out.config_hash = map.config_hash;
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(out.n_pixels()); ++p) {
        const int r = static_cast<int>(p) / map.cols;
        const int c = static_cast<int>(p) % map.cols;
        const Point2 s = inv.apply({static_cast<double>(c), static_cast<double>(r)});
        const int x = static_cast<int>(std::lround(s.x));
        const int y = static_cast<int>(std::lround(s.y));
        if (x < 0 || y < 0 || x >= map.cols || y >= map.rows) {
            out.mask[p] = 0;
            continue;
        }
        const std::size_t i = static_cast<std::size_t>(y) * map.cols + x;
        if (!map.is_tissue(i)) {
            out.mask[p] = 0;
            continue;
        }
        out.labels[p] = map.labels[i];
        out.mask[p] = 1;
    }
    return out;
}

HyperCube mask_background(const HyperCube& cube, double lo, double hi) {
    if (cube.quantity != Quantity::Reflectance)
        throw DataError("mask_background expects a reflectance cube");
    if (!(lo < hi)) throw DataError("mask_background: lo must be < hi");
    const auto idx = cube.grid.in_range(400.0, 900.0);
    if (idx.empty())
        throw DataError("mask_background: grid has no bands in 400-900 nm");

    HyperCube out = cube;
    const std::size_t np = cube.n_pixels();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        if (!cube.is_tissue(p)) {
            out.mask[p] = 0;
            continue;
        }
        const double* s = cube.pixel(p);
        double m = 0.0;
        for (const auto b : idx) m += s[b];
        m /= static_cast<double>(idx.size());
        out.mask[p] = (m >= lo && m <= hi) ? 1 : 0;
    }

    if (out.count_unmasked() == 0)
        throw DataError("mask_background: every pixel masked (empty tissue)");
    out.provenance.push_back("mask_background");
    return out;
}

namespace {

HyperCube apply_savgol(const HyperCube& cube, const SavgolPlan& plan,
                       Quantity out_quantity, const std::string& step) {
    HyperCube out(cube.rows, cube.cols, cube.grid, out_quantity);
    out.mask = cube.mask;
    out.provenance = cube.provenance;
    out.provenance.push_back(step);
    out.config_hash = cube.config_hash;
    const std::size_t np = cube.n_pixels();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p)
        plan.apply(cube.pixel(p), out.pixel(p));
    return out;
}

} // namespace

HyperCube smooth_spectra(const HyperCube& cube, int window, int polyorder) {
    const SavgolPlan plan = SavgolPlan::build(cube.grid, window, polyorder, 0);
    HyperCube out = apply_savgol(cube, plan, cube.quantity, "smooth_spectra");
    if (out.quantity == Quantity::Reflectance) {
        // Smoothing can undershoot 0 next to sharp dips; keep the invariant.
        for (auto& v : out.data) v = std::max(v, 0.0);
    }
    return out;
}

HyperCube smooth_spectra(const HyperCube& cube,
                         const std::vector<SavgolPlan::Region>& regions) {
    const SavgolPlan plan = SavgolPlan::build_regions(cube.grid, regions);
    HyperCube out = apply_savgol(cube, plan, cube.quantity, "smooth_spectra");
    if (out.quantity == Quantity::Reflectance) {
        for (auto& v : out.data) v = std::max(v, 0.0);
    }
    return out;
}

HyperCube l2_normalize(const HyperCube& cube) {
    HyperCube out = cube;
    out.quantity = Quantity::Normalized;
    out.provenance.push_back("l2_normalize");
    const std::size_t np = cube.n_pixels();
    const std::size_t nb = cube.bands();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        if (!cube.is_tissue(p)) continue;
        const double* in = cube.pixel(p);
        double s = 0.0;
        for (std::size_t b = 0; b < nb; ++b) s += in[b] * in[b];
        const double norm = std::sqrt(s);
        if (norm < 1e-30) {
            out.mask[p] = 0;
            continue;
        }
        double* o = out.pixel(p);
        for (std::size_t b = 0; b < nb; ++b) o[b] = in[b] / norm;
    }
    return out;
}

HyperCube zscore_bands(const HyperCube& cube) {
    const std::size_t np = cube.n_pixels();
    const std::size_t nb = cube.bands();
    std::vector<std::size_t> live;
    live.reserve(np);
    for (std::size_t p = 0; p < np; ++p)
        if (cube.is_tissue(p)) live.push_back(p);
    if (live.size() < 2)
        throw DataError("zscore_bands: need at least 2 unmasked pixels");

    std::vector<double> mean(nb), std_dev(nb);
#pragma omp parallel
    {
        std::vector<double> col(live.size());
#pragma omp for schedule(static)
        for (long long b = 0; b < static_cast<long long>(nb); ++b) {
            for (std::size_t i = 0; i < live.size(); ++i)
                col[i] = cube.data[live[i] * nb + b];
            const MeanStd ms = mean_std(col);
            mean[b] = ms.mean;
            // Constant bands produce numerically tiny stds; flush to zero.
            std_dev[b] = (ms.std < 1e-12 * std::max(1.0, std::fabs(ms.mean)))
                             ? 0.0
                             : ms.std;
        }
    }

    HyperCube out = cube;
    out.quantity = Quantity::Normalized;
    out.provenance.push_back("zscore_bands");
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        if (!cube.is_tissue(p)) continue;
        const double* in = cube.pixel(p);
        double* o = out.pixel(p);
        for (std::size_t b = 0; b < nb; ++b)
            o[b] = (std_dev[b] == 0.0) ? 0.0 : (in[b] - mean[b]) / std_dev[b];
    }
    return out;
}

} // namespace burnmap
