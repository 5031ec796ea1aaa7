#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace burnmap {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Pairwise (cascade) summation. Order of operations depends only on the
/// element order, so results are run-to-run identical regardless of thread
/// count in the callers.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(std::span<const double> x) {
    return pairwise_sum(x.data(), x.size());
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // population (1/N)
};

/// Population mean/std via two passes of pairwise summation.
inline MeanStd mean_std(std::span<const double> x) {
    MeanStd r;
    const std::size_t n = x.size();
    if (n == 0) return r;
    r.mean = pairwise_sum(x) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - r.mean;
        sq[i] = d * d;
    }
    r.std = std::sqrt(pairwise_sum(sq.data(), n) / static_cast<double>(n));
    return r;
}

inline bool nearly_equal(double a, double b, double rel, double abs_tol = 0.0) {
    const double diff = std::fabs(a - b);
    if (diff <= abs_tol) return true;
    return diff <= rel * std::max(std::fabs(a), std::fabs(b));
}

} // namespace burnmap
