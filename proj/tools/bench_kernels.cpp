// Times the OpenMP kernels against their serial reference implementations
// and checks that both routes agree.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "burnmap/clustering.hpp"
#include "burnmap/lsci.hpp"
#include "burnmap/preprocess.hpp"
#include "burnmap/reference.hpp"
#include "burnmap/rng.hpp"
#include "burnmap/types.hpp"

using namespace burnmap;

namespace {

using clock_type = std::chrono::steady_clock;

template <typename F>
double time_ms(F&& fn) {
    const auto t0 = clock_type::now();
    fn();
    const auto t1 = clock_type::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]) && std::isnan(b[i])) continue;
        const double scale = std::max({std::fabs(a[i]), std::fabs(b[i]), 1e-12});
        m = std::max(m, std::fabs(a[i] - b[i]) / scale);
    }
    return m;
}

void report(const char* name, double serial_ms, double parallel_ms, double diff) {
    std::printf("%-18s serial %8.1f ms   omp %8.1f ms   speedup %5.2fx   max rel diff %.2e\n",
                name, serial_ms, parallel_ms, serial_ms / parallel_ms, diff);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"burnmap kernel benchmark: OpenMP vs serial reference"};
    int side = 96;
    int bands = 200;
    int frames = 32;
    int affinity_n = 800;
    app.add_option("--side", side, "image side length");
    app.add_option("--bands", bands, "spectral bands");
    app.add_option("--frames", frames, "speckle frames");
    app.add_option("--affinity-n", affinity_n, "rows for the affinity kernel");
    CLI11_PARSE(app, argc, argv);

    Rng rng(7);
    const auto grid = WavelengthGrid::linspace(400.0, 2100.0, bands);
    HyperCube cube(side, side, grid, Quantity::Reflectance);
    for (auto& v : cube.data) v = 0.2 + 0.6 * rng.uniform();

    {
        const auto target = WavelengthGrid::linspace(420.0, 2080.0, bands - 10);
        HyperCube a = cube, b = cube;
        const double ts = time_ms([&] { a = ref::resample_cube(cube, target); });
        const double tp = time_ms([&] { b = resample_to_grid(cube, target); });
        report("resample", ts, tp, max_rel_diff(a.data, b.data));
    }
    {
        HyperCube a = cube, b = cube;
        const double ts = time_ms([&] { a = ref::savgol_smooth(cube, 9, 3); });
        const double tp = time_ms([&] { b = smooth_spectra(cube, 9, 3); });
        report("savgol_smooth", ts, tp, max_rel_diff(a.data, b.data));
    }
    {
        HyperCube a = cube, b = cube;
        const double ts = time_ms([&] { a = ref::l2_normalize(cube); });
        const double tp = time_ms([&] { b = l2_normalize(cube); });
        report("l2_normalize", ts, tp, max_rel_diff(a.data, b.data));
    }
    {
        HyperCube a = cube, b = cube;
        const double ts = time_ms([&] { a = ref::zscore_bands(cube); });
        const double tp = time_ms([&] { b = zscore_bands(cube); });
        report("zscore_bands", ts, tp, max_rel_diff(a.data, b.data));
    }
    {
        FlowMap flow(side, side);
        for (std::size_t p = 0; p < flow.flow.size(); ++p)
            flow.flow[p] = 0.5 + (p % 5);
        const FrameStack stack = simulate_speckle(flow, frames, 11);
        ScalarMap a(side, side, "", ""), b(side, side, "", "");
        const double ts = time_ms([&] { a = ref::temporal_contrast(stack); });
        const double tp = time_ms([&] { b = temporal_contrast(stack); });
        report("temporal_K", ts, tp, max_rel_diff(a.values, b.values));
        const double ts2 = time_ms([&] { a = ref::spatial_contrast(stack, 7); });
        const double tp2 = time_ms([&] { b = spatial_contrast(stack, 7); });
        report("spatial_K", ts2, tp2, max_rel_diff(a.values, b.values));
    }
    {
        const int d = 10;
        std::vector<double> rows(static_cast<std::size_t>(affinity_n) * d);
        for (auto& v : rows) v = rng.normal();
        std::vector<double> a, b;
        const double ts = time_ms([&] { a = ref::cosine_affinity(rows, affinity_n, d); });
        const double tp = time_ms([&] { b = cosine_affinity(rows, affinity_n, d); });
        report("cosine_affinity", ts, tp, max_rel_diff(a, b));
    }
    return 0;
}
