#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "burnmap/io.hpp"
#include "burnmap/reference.hpp"
#include "burnmap/rng.hpp"
#include "burnmap/types.hpp"

using namespace burnmap;

namespace {

HyperCube make_cube(int rows, int cols, const WavelengthGrid& grid,
                    std::uint64_t seed, Quantity q = Quantity::Reflectance) {
    HyperCube cube(rows, cols, grid, q);
    Rng rng(seed);
    for (auto& v : cube.data) v = 0.1 + 0.8 * rng.uniform();
    return cube;
}

std::string temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "burnmap_core_test";
    std::filesystem::create_directories(dir);
    return dir.string();
}

} // namespace

TEST_CASE("wavelength grid invariants") {
    CHECK_THROWS_AS(WavelengthGrid({}), DataError);
    CHECK_THROWS_AS(WavelengthGrid({500.0, 500.0}), DataError);
    CHECK_THROWS_AS(WavelengthGrid({600.0, 500.0}), DataError);
    CHECK_THROWS_AS(WavelengthGrid({100.0, 500.0}), DataError);   // below envelope
    CHECK_THROWS_AS(WavelengthGrid({500.0, 2600.0}), DataError);  // above envelope
    const auto g = WavelengthGrid::linspace(400.0, 2100.0, 341);
    CHECK(g.size() == 341);
    CHECK(g.front() == doctest::Approx(400.0));
    CHECK(g.back() == doctest::Approx(2100.0));
    CHECK(g[g.nearest(970.0)] == doctest::Approx(970.0).epsilon(0.01));
}

TEST_CASE("resample: identity on identical grids is exact") {
    const auto grid = WavelengthGrid::linspace(400.0, 2100.0, 50);
    const HyperCube cube = make_cube(4, 5, grid, 11);
    const HyperCube out = resample_to_grid(cube, grid);
    CHECK(out.data == cube.data); // bitwise
    CHECK(out.provenance.back() == "resample_to_grid");
    CHECK(out.quantity == cube.quantity);
}

TEST_CASE("resample: constant spectrum stays constant") {
    const auto grid = WavelengthGrid::linspace(400.0, 2100.0, 40);
    HyperCube cube(2, 2, grid, Quantity::Reflectance);
    for (auto& v : cube.data) v = 0.5;
    const auto target = WavelengthGrid::linspace(455.0, 2001.0, 77);
    const HyperCube out = resample_to_grid(cube, target);
    for (const double v : out.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("resample: linear spectrum matches brute-force interpolation oracle") {
    const auto grid = WavelengthGrid::linspace(400.0, 2100.0, 35);
    HyperCube cube(3, 3, grid, Quantity::Reflectance);
    for (std::size_t p = 0; p < cube.n_pixels(); ++p)
        for (std::size_t b = 0; b < cube.bands(); ++b)
            cube.pixel(p)[b] = grid[b] / 2100.0;
    // Midpoint target grid.
    std::vector<double> mid;
    for (std::size_t b = 0; b + 1 < grid.size(); ++b)
        mid.push_back(0.5 * (grid[b] + grid[b + 1]));
    const WavelengthGrid target{mid};
    const HyperCube out = resample_to_grid(cube, target);
    const HyperCube oracle = ref::resample_cube(cube, target);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(oracle.data[i]).epsilon(1e-12));
    // Midpoints of a linear function are the segment averages.
    for (std::size_t b = 0; b + 1 < grid.size(); ++b)
        CHECK(out.pixel(0)[b] ==
              doctest::Approx((grid[b] + grid[b + 1]) / 2.0 / 2100.0).epsilon(1e-12));
}

TEST_CASE("resample: out-of-range target throws") {
    const auto grid = WavelengthGrid::linspace(500.0, 2000.0, 20);
    const HyperCube cube = make_cube(2, 2, grid, 3);
    CHECK_THROWS_AS(resample_to_grid(cube, WavelengthGrid::linspace(450.0, 1900.0, 10)),
                    DataError);
    CHECK_THROWS_AS(resample_to_grid(cube, WavelengthGrid::linspace(600.0, 2050.0, 10)),
                    DataError);
}

TEST_CASE("resample property: idempotent on its own grid") {
    const auto grid = WavelengthGrid::linspace(420.0, 2080.0, 61);
    const HyperCube cube = make_cube(3, 4, grid, 17);
    const auto target = WavelengthGrid::linspace(430.0, 2000.0, 41);
    const HyperCube once = resample_to_grid(cube, target);
    const HyperCube twice = resample_to_grid(once, target);
    for (std::size_t i = 0; i < once.data.size(); ++i)
        CHECK(twice.data[i] == once.data[i]); // exact grid hits copy bit-for-bit
}

TEST_CASE("merge: disjoint ranges concatenate; swir wins overlap") {
    const auto vg = WavelengthGrid::linspace(400.0, 1100.0, 71);
    const auto sg = WavelengthGrid::linspace(1050.0, 2100.0, 106);
    HyperCube vnir = make_cube(3, 3, vg, 5);
    HyperCube swir(3, 3, sg, Quantity::Reflectance);
    for (auto& v : swir.data) v = 0.77;

    const HyperCube merged = merge_cubes(vnir, swir);
    // All bands at or above the SWIR start come from the SWIR cube.
    for (std::size_t b = 0; b < merged.bands(); ++b) {
        if (merged.grid[b] >= 1050.0) {
            for (std::size_t p = 0; p < merged.n_pixels(); ++p)
                CHECK(merged.pixel(p)[b] == 0.77); // element-wise oracle
        }
    }
    CHECK(merged.grid.front() >= 400.0);
    CHECK(merged.grid.back() <= 2100.0);

    // Constant cubes merge to the same constant.
    HyperCube cv(2, 2, vg, Quantity::Reflectance), cs(2, 2, sg, Quantity::Reflectance);
    for (auto& v : cv.data) v = 0.3;
    for (auto& v : cs.data) v = 0.3;
    const HyperCube cm = merge_cubes(cv, cs);
    for (const double v : cm.data) CHECK(v == 0.3);
}

TEST_CASE("merge: spatial mismatch throws shape error") {
    const auto vg = WavelengthGrid::linspace(400.0, 1000.0, 10);
    const auto sg = WavelengthGrid::linspace(1100.0, 2100.0, 10);
    CHECK_THROWS_AS(merge_cubes(make_cube(2, 2, vg, 1), make_cube(3, 2, sg, 2)),
                    DataError);
}

TEST_CASE("crop: full range is identity; count matches independent scan") {
    const auto grid = WavelengthGrid::linspace(350.0, 2500.0, 216);
    const HyperCube cube = make_cube(2, 3, grid, 29);

    const HyperCube full = crop_bands(cube, 350.0, 2500.0);
    CHECK(full.data == cube.data);
    CHECK(full.bands() == cube.bands());

    const HyperCube cropped = crop_bands(cube, 400.0, 2100.0);
    std::size_t expected = 0; // independent scan of the grid
    for (const double nm : grid.values())
        if (nm >= 400.0 && nm <= 2100.0) expected += 1;
    CHECK(cropped.bands() == expected);

    CHECK_THROWS_AS(crop_bands(cube, 900.0, 500.0), DataError);
    // Grid spacing is 10 nm; this window falls between band centers.
    CHECK_THROWS_AS(crop_bands(cube, 2401.0, 2409.0), DataError);
}

TEST_CASE("property: crop-then-resample equals resample-onto-cropped-grid") {
    const auto grid = WavelengthGrid::linspace(400.0, 2100.0, 101);
    const HyperCube cube = make_cube(4, 4, grid, 7);
    const auto target = WavelengthGrid::linspace(500.0, 1800.0, 64);

    const HyperCube a = resample_to_grid(crop_bands(cube, 450.0, 1900.0), target);
    const HyperCube b = resample_to_grid(cube, target);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-12));
}

TEST_CASE("cube io round-trips bit-exactly") {
    const auto grid = WavelengthGrid::linspace(400.0, 2100.0, 33);
    HyperCube cube = make_cube(5, 4, grid, 99);
    cube.mask[3] = 0;
    cube.mask[17] = 0;
    cube.provenance = {"generate_phantom", "crop_bands"};
    cube.config_hash = "deadbeef";

    const std::string base = temp_dir() + "/cube";
    write_cube(cube, base);
    const HyperCube back = read_cube(base);
    CHECK(back.rows == cube.rows);
    CHECK(back.cols == cube.cols);
    CHECK(back.grid == cube.grid);
    CHECK(back.mask == cube.mask);
    CHECK(back.provenance == cube.provenance);
    CHECK(back.quantity == cube.quantity);
    CHECK(back.config_hash == cube.config_hash);
    for (std::size_t i = 0; i < cube.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(cube.data[i]).epsilon(1e-6));

    // Values go through float32; writing the read-back cube again must be
    // byte-identical.
    write_cube(back, base + "_2");
    const HyperCube back2 = read_cube(base + "_2");
    CHECK(back2.data == back.data);
}

TEST_CASE("scalar map io: NaN sentinel marks masked pixels") {
    ScalarMap map(4, 3, "dtwi", "index");
    for (std::size_t p = 0; p < map.n_pixels(); ++p) map.set(p, 0.1 * p);
    map.set_masked(5);
    const std::string base = temp_dir() + "/map";
    write_scalar_map(map, base);
    const ScalarMap back = read_scalar_map(base);
    CHECK(back.name == "dtwi");
    CHECK_FALSE(back.is_tissue(5));
    CHECK(std::isnan(back.values[5]));
    CHECK(back.is_tissue(4));
    CHECK(back.values[4] == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("label map io round-trip and k invariant") {
    LabelMap lab(3, 3, 4);
    for (std::size_t p = 0; p < lab.n_pixels(); ++p)
        lab.labels[p] = static_cast<std::uint16_t>(p % 4);
    lab.mask[2] = 0;
    const std::string base = temp_dir() + "/labels";
    write_label_map(lab, base);
    const LabelMap back = read_label_map(base);
    CHECK(back.labels == lab.labels);
    CHECK(back.mask == lab.mask);
    CHECK(back.k == 4);

    LabelMap bad(2, 2, 2);
    bad.labels[0] = 5;
    CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("png writer produces the PNG signature") {
    ScalarMap map(16, 16, "k", "ratio");
    Rng rng(4);
    for (std::size_t p = 0; p < map.n_pixels(); ++p) map.set(p, rng.uniform());
    const std::string path = temp_dir() + "/map.png";
    write_map_png(map, path);
    std::ifstream f(path, std::ios::binary);
    std::array<unsigned char, 8> sig{};
    f.read(reinterpret_cast<char*>(sig.data()), 8);
    CHECK(sig[0] == 0x89);
    CHECK(sig[1] == 'P');
    CHECK(sig[2] == 'N');
    CHECK(sig[3] == 'G');
}

TEST_CASE("reflectance invariant: negatives rejected by validate") {
    const auto grid = WavelengthGrid::linspace(400.0, 2100.0, 5);
    HyperCube cube(2, 2, grid, Quantity::Reflectance);
    cube.pixel(1)[2] = -0.25;
    CHECK_THROWS_AS(cube.validate(), DataError);
    cube.mask[1] = 0; // masked pixels are ignored by all statistics
    CHECK_NOTHROW(cube.validate());
}
