#include "burnmap/reference.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace burnmap::ref {

double interp_linear(const std::vector<double>& xs, const std::vector<double>& ys,
                     double x) {
    if (xs.size() < 2 || xs.size() != ys.size())
        throw DataError("ref::interp_linear: bad table");
    if (x < xs.front() || x > xs.back())
        throw DataError("ref::interp_linear: query outside range");
    for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
        if (x >= xs[s] && x <= xs[s + 1]) {
            if (x == xs[s]) return ys[s];
            if (x == xs[s + 1]) return ys[s + 1];
            const double a = (x - xs[s]) / (xs[s + 1] - xs[s]);
            return ys[s] + a * (ys[s + 1] - ys[s]);
        }
    }
    return ys.back();
}

HyperCube resample_cube(const HyperCube& cube, const WavelengthGrid& target) {
    HyperCube out(cube.rows, cube.cols, target, cube.quantity);
    out.mask = cube.mask;
    std::vector<double> spectrum(cube.bands());
    for (std::size_t p = 0; p < cube.n_pixels(); ++p) {
        const double* in = cube.pixel(p);
        spectrum.assign(in, in + cube.bands());
        double* o = out.pixel(p);
        for (std::size_t j = 0; j < target.size(); ++j)
            o[j] = interp_linear(cube.grid.values(), spectrum, target[j]);
    }
    return out;
}

HyperCube savgol_smooth(const HyperCube& cube, int window, int polyorder) {
    const int nb = static_cast<int>(cube.bands());
    const int h = (window - 1) / 2;
    HyperCube out(cube.rows, cube.cols, cube.grid, cube.quantity);
    out.mask = cube.mask;
    for (std::size_t p = 0; p < cube.n_pixels(); ++p) {
        const double* in = cube.pixel(p);
        double* o = out.pixel(p);
        for (int i = 0; i < nb; ++i) {
            const int lo = std::max(0, i - h);
            const int hi = std::min(nb - 1, i + h);
            const int len = hi - lo + 1;
            const int order = std::min(polyorder, len - 1);
            Eigen::MatrixXd V(len, order + 1);
            Eigen::VectorXd y(len);
            for (int j = 0; j < len; ++j) {
                const double dx = cube.grid[lo + j] - cube.grid[i];
                double t = 1.0;
                for (int m = 0; m <= order; ++m) {
                    V(j, m) = t;
                    t *= dx;
                }
                y(j) = in[lo + j];
            }
            const Eigen::VectorXd coef =
                V.colPivHouseholderQr().solve(y);
            o[i] = coef(0);
        }
    }
    return out;
}

ScalarMap temporal_contrast(const FrameStack& stack) {
    ScalarMap out(stack.rows, stack.cols, "speckle_contrast", "ratio");
    const std::size_t fs = stack.frame_size();
    for (std::size_t p = 0; p < fs; ++p) {
        double mean = 0.0;
        for (int f = 0; f < stack.frames; ++f)
            mean += stack.data[static_cast<std::size_t>(f) * fs + p];
        mean /= stack.frames;
        if (mean < 1e-9) {
            out.set_masked(p);
            continue;
        }
        double var = 0.0;
        for (int f = 0; f < stack.frames; ++f) {
            const double d = stack.data[static_cast<std::size_t>(f) * fs + p] - mean;
            var += d * d;
        }
        out.set(p, std::sqrt(var / stack.frames) / mean);
    }
    return out;
}

ScalarMap spatial_contrast(const FrameStack& stack, int window) {
    const int h = window / 2;
    const std::size_t fs = stack.frame_size();
    ScalarMap out(stack.rows, stack.cols, "speckle_contrast", "ratio");
    std::vector<double> acc(fs, 0.0);
    std::vector<bool> dead(fs, false);
    for (int f = 0; f < stack.frames; ++f) {
        for (int r = 0; r < stack.rows; ++r)
            for (int c = 0; c < stack.cols; ++c) {
                double sum = 0.0;
                int cnt = 0;
                for (int dr = -h; dr <= h; ++dr)
                    for (int dc = -h; dc <= h; ++dc) {
                        const int rr = r + dr, cc = c + dc;
                        if (rr < 0 || rr >= stack.rows || cc < 0 || cc >= stack.cols)
                            continue;
                        sum += stack.at(f, rr, cc);
                        cnt += 1;
                    }
                const double mean = sum / cnt;
                const std::size_t p = static_cast<std::size_t>(r) * stack.cols + c;
                if (mean < 1e-9) {
                    dead[p] = true;
                    continue;
                }
                double var = 0.0;
                for (int dr = -h; dr <= h; ++dr)
                    for (int dc = -h; dc <= h; ++dc) {
                        const int rr = r + dr, cc = c + dc;
                        if (rr < 0 || rr >= stack.rows || cc < 0 || cc >= stack.cols)
                            continue;
                        const double diff = stack.at(f, rr, cc) - mean;
                        var += diff * diff;
                    }
                acc[p] += std::sqrt(var / cnt) / mean;
            }
    }
    for (std::size_t p = 0; p < fs; ++p) {
        if (dead[p])
            out.set_masked(p);
        else
            out.set(p, acc[p] / stack.frames);
    }
    return out;
}

std::vector<double> cosine_affinity(const std::vector<double>& data, int n, int d) {
    std::vector<double> A(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) {
                A[static_cast<std::size_t>(i) * n + j] = 1.0;
                continue;
            }
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (int m = 0; m < d; ++m) {
                const double a = data[static_cast<std::size_t>(i) * d + m];
                const double b = data[static_cast<std::size_t>(j) * d + m];
                dot += a * b;
                ni += a * a;
                nj += b * b;
            }
            if (ni <= 0.0 || nj <= 0.0)
                throw DataError("ref::cosine_affinity: zero row");
            A[static_cast<std::size_t>(i) * n + j] =
                0.5 * (1.0 + dot / std::sqrt(ni * nj));
        }
    return A;
}

HyperCube l2_normalize(const HyperCube& cube) {
    HyperCube out = cube;
    out.quantity = Quantity::Normalized;
    for (std::size_t p = 0; p < cube.n_pixels(); ++p) {
        if (!cube.is_tissue(p)) continue;
        const double* in = cube.pixel(p);
        double s = 0.0;
        for (std::size_t b = 0; b < cube.bands(); ++b) s += in[b] * in[b];
        const double norm = std::sqrt(s);
        if (norm < 1e-30) {
            out.mask[p] = 0;
            continue;
        }
        double* o = out.pixel(p);
        for (std::size_t b = 0; b < cube.bands(); ++b) o[b] = in[b] / norm;
    }
    return out;
}

HyperCube zscore_bands(const HyperCube& cube) {
    HyperCube out = cube;
    out.quantity = Quantity::Normalized;
    const std::size_t nb = cube.bands();
    for (std::size_t b = 0; b < nb; ++b) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t p = 0; p < cube.n_pixels(); ++p) {
            if (!cube.is_tissue(p)) continue;
            sum += cube.data[p * nb + b];
            cnt += 1;
        }
        const double mean = sum / static_cast<double>(cnt);
        double var = 0.0;
        for (std::size_t p = 0; p < cube.n_pixels(); ++p) {
            if (!cube.is_tissue(p)) continue;
            const double d = cube.data[p * nb + b] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(cnt));
        const bool degenerate = sd < 1e-12 * std::max(1.0, std::fabs(mean));
        for (std::size_t p = 0; p < cube.n_pixels(); ++p) {
            if (!cube.is_tissue(p)) continue;
            out.data[p * nb + b] =
                degenerate ? 0.0 : (cube.data[p * nb + b] - mean) / sd;
        }
    }
    return out;
}

} // namespace burnmap::ref
