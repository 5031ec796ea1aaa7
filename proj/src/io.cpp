#include "burnmap/io.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include <json.hpp>

namespace burnmap {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_bytes(const std::string& path, const void* data, std::size_t n) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path);
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!f) throw DataError("short write: " + path);
}

std::vector<char> read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw DataError("cannot open: " + path);
    const auto n = f.tellg();
    f.seekg(0);
    std::vector<char> buf(static_cast<std::size_t>(n));
    f.read(buf.data(), n);
    if (!f) throw DataError("short read: " + path);
    return buf;
}

void write_f32(const std::string& path, const std::vector<double>& v) {
    std::vector<float> f(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) f[i] = static_cast<float>(v[i]);
    write_bytes(path, f.data(), f.size() * sizeof(float));
}

std::vector<double> read_f32(const std::string& path, std::size_t expect) {
    const auto buf = read_bytes(path);
    if (buf.size() != expect * sizeof(float))
        throw DataError("raw file size mismatch: " + path);
    std::vector<float> f(expect);
    std::memcpy(f.data(), buf.data(), buf.size());
    std::vector<double> v(expect);
    for (std::size_t i = 0; i < expect; ++i) v[i] = static_cast<double>(f[i]);
    return v;
}

json read_header(const std::string& base, const std::string& expect_format) {
    const std::string path = base + ".hdr.json";
    std::ifstream f(path);
    if (!f) throw DataError("cannot open header: " + path);
    json h;
    try {
        f >> h;
    } catch (const json::exception& e) {
        throw ConfigError("bad header json " + path + ": " + e.what());
    }
    if (h.value("format", "") != expect_format)
        throw ConfigError("header " + path + " is not a " + expect_format);
    if (h.value("byte_order", "") != "little-endian")
        throw ConfigError("header " + path + ": unsupported byte order");
    return h;
}

void write_header(const std::string& base, const json& h) {
    std::ofstream f(base + ".hdr.json");
    if (!f) throw DataError("cannot open for write: " + base + ".hdr.json");
    f << h.dump(2) << "\n";
}

bool all_true(const std::vector<std::uint8_t>& mask) {
    for (auto m : mask)
        if (!m) return false;
    return true;
}

std::string basename_of(const std::string& base) {
    return fs::path(base).filename().string();
}

} // namespace

void write_cube(const HyperCube& cube, const std::string& base) {
    json h;
    h["format"] = "burnmap-cube";
    h["rows"] = cube.rows;
    h["cols"] = cube.cols;
    h["bands"] = cube.bands();
    h["wavelengths_nm"] = cube.grid.values();
    h["quantity"] = quantity_name(cube.quantity);
    h["provenance"] = cube.provenance;
    h["byte_order"] = "little-endian";
    h["interleave"] = "BIP";
    h["dtype"] = "float32";
    h["data_file"] = basename_of(base) + ".raw";
    if (!all_true(cube.mask)) {
        h["mask_file"] = basename_of(base) + ".mask.raw";
        write_bytes(base + ".mask.raw", cube.mask.data(), cube.mask.size());
    }
    if (!cube.config_hash.empty()) h["config_hash"] = cube.config_hash;
    write_header(base, h);
    write_f32(base + ".raw", cube.data);
}

HyperCube read_cube(const std::string& base) {
    const json h = read_header(base, "burnmap-cube");
    const int rows = h.at("rows").get<int>();
    const int cols = h.at("cols").get<int>();
    const auto nm = h.at("wavelengths_nm").get<std::vector<double>>();
    if (h.at("bands").get<std::size_t>() != nm.size())
        throw ConfigError("header band count does not match wavelength list");
    if (h.value("interleave", "BIP") != "BIP")
        throw ConfigError("unsupported interleave");
    HyperCube cube(rows, cols, WavelengthGrid(nm),
                   quantity_from_name(h.at("quantity").get<std::string>()));
    cube.data = read_f32(
        (fs::path(base).parent_path() / h.at("data_file").get<std::string>()).string(),
        cube.n_pixels() * cube.bands());
    if (h.contains("mask_file")) {
        const auto buf = read_bytes(
            (fs::path(base).parent_path() / h.at("mask_file").get<std::string>()).string());
        if (buf.size() != cube.n_pixels()) throw DataError("mask file size mismatch");
        std::memcpy(cube.mask.data(), buf.data(), buf.size());
    }
    if (h.contains("provenance"))
        cube.provenance = h.at("provenance").get<std::vector<std::string>>();
    cube.config_hash = h.value("config_hash", "");
    return cube;
}

void write_scalar_map(const ScalarMap& map, const std::string& base) {
    json h;
    h["format"] = "burnmap-map";
    h["rows"] = map.rows;
    h["cols"] = map.cols;
    h["bands"] = 1;
    h["name"] = map.name;
    h["units"] = map.units;
    h["byte_order"] = "little-endian";
    h["dtype"] = "float32";
    h["data_file"] = basename_of(base) + ".raw";
    if (!map.config_hash.empty()) h["config_hash"] = map.config_hash;
    write_header(base, h);
    write_f32(base + ".raw", map.values); // masked pixels are NaN
}

ScalarMap read_scalar_map(const std::string& base) {
    const json h = read_header(base, "burnmap-map");
    ScalarMap map(h.at("rows").get<int>(), h.at("cols").get<int>(),
                  h.value("name", ""), h.value("units", ""));
    map.values = read_f32(
        (fs::path(base).parent_path() / h.at("data_file").get<std::string>()).string(),
        map.n_pixels());
    for (std::size_t p = 0; p < map.n_pixels(); ++p)
        map.mask[p] = std::isnan(map.values[p]) ? 0 : 1;
    map.config_hash = h.value("config_hash", "");
    return map;
}

void write_label_map(const LabelMap& map, const std::string& base) {
    json h;
    h["format"] = "burnmap-labels";
    h["rows"] = map.rows;
    h["cols"] = map.cols;
    h["bands"] = 1;
    h["k"] = map.k;
    h["byte_order"] = "little-endian";
    h["dtype"] = "uint16";
    h["data_file"] = basename_of(base) + ".raw";
    if (!all_true(map.mask)) {
        h["mask_file"] = basename_of(base) + ".mask.raw";
        write_bytes(base + ".mask.raw", map.mask.data(), map.mask.size());
    }
    if (!map.config_hash.empty()) h["config_hash"] = map.config_hash;
    write_header(base, h);
    write_bytes(base + ".raw", map.labels.data(),
                map.labels.size() * sizeof(std::uint16_t));
}

LabelMap read_label_map(const std::string& base) {
    const json h = read_header(base, "burnmap-labels");
    LabelMap map(h.at("rows").get<int>(), h.at("cols").get<int>(), h.at("k").get<int>());
    const auto buf = read_bytes(
        (fs::path(base).parent_path() / h.at("data_file").get<std::string>()).string());
    if (buf.size() != map.n_pixels() * sizeof(std::uint16_t))
        throw DataError("label raw size mismatch");
    std::memcpy(map.labels.data(), buf.data(), buf.size());
    if (h.contains("mask_file")) {
        const auto mbuf = read_bytes(
            (fs::path(base).parent_path() / h.at("mask_file").get<std::string>()).string());
        if (mbuf.size() != map.n_pixels()) throw DataError("mask file size mismatch");
        std::memcpy(map.mask.data(), mbuf.data(), mbuf.size());
    }
    map.config_hash = h.value("config_hash", "");
    map.validate();
    return map;
}

void write_frame_stack(const FrameStack& stack, const std::string& base) {
    json h;
    h["format"] = "burnmap-frames";
    h["frames"] = stack.frames;
    h["rows"] = stack.rows;
    h["cols"] = stack.cols;
    h["exposure_s"] = stack.exposure_s;
    h["rate_hz"] = stack.rate_hz;
    h["byte_order"] = "little-endian";
    h["dtype"] = "float32";
    h["order"] = "frame-major";
    h["data_file"] = basename_of(base) + ".raw";
    write_header(base, h);
    write_f32(base + ".raw", stack.data);
}

FrameStack read_frame_stack(const std::string& base) {
    const json h = read_header(base, "burnmap-frames");
    FrameStack s(h.at("frames").get<int>(), h.at("rows").get<int>(),
                 h.at("cols").get<int>(), h.at("exposure_s").get<double>(),
                 h.at("rate_hz").get<double>());
    s.data = read_f32(
        (fs::path(base).parent_path() / h.at("data_file").get<std::string>()).string(),
        static_cast<std::size_t>(s.frames) * s.frame_size());
    s.validate();
    return s;
}

// ---- PNG ----------------------------------------------------------------

namespace {

void push_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
}

void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                const std::vector<std::uint8_t>& payload) {
    push_u32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const auto crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    push_u32(out, static_cast<std::uint32_t>(crc));
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& pixels) {
    if (width <= 0 || height <= 0) throw DataError("png dims must be positive");
    const std::size_t row_bytes = static_cast<std::size_t>(width) * channels;
    if (pixels.size() != row_bytes * height) throw DataError("png pixel buffer size mismatch");

    // Filter byte 0 before each scanline.
    std::vector<std::uint8_t> raw;
    raw.reserve((row_bytes + 1) * height);
    for (int r = 0; r < height; ++r) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + static_cast<std::ptrdiff_t>(r) * row_bytes,
                   pixels.begin() + static_cast<std::ptrdiff_t>(r + 1) * row_bytes);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw NumericError("zlib compression failed");
    comp.resize(comp_len);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    push_u32(ihdr, static_cast<std::uint32_t>(width));
    push_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);                                   // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);               // gray / rgb
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", comp);
    push_chunk(out, "IEND", {});
    write_bytes(path, out.data(), out.size());
}

} // namespace

void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels) {
    write_png(path, width, height, 1, pixels);
}

void write_png_rgb8(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels) {
    write_png(path, width, height, 3, pixels);
}

void write_map_png(const ScalarMap& map, const std::string& path) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t p = 0; p < map.n_pixels(); ++p) {
        if (!map.is_tissue(p)) continue;
        const double v = map.values[p];
        if (!any) { lo = hi = v; any = true; }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = (hi > lo) ? hi - lo : 1.0;
    std::vector<std::uint8_t> px(map.n_pixels(), 0);
    for (std::size_t p = 0; p < map.n_pixels(); ++p) {
        if (!map.is_tissue(p)) continue;
        const double t = (map.values[p] - lo) / span;
        px[p] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
    }
    write_png_gray8(path, map.cols, map.rows, px);
}

std::array<std::array<std::uint8_t, 3>, 4> label_palette() {
    // unburned, superficial, deep-partial, full-thickness
    return {{{44, 123, 182}, {171, 217, 233}, {253, 174, 97}, {215, 25, 28}}};
}

void write_label_png(const LabelMap& map, const std::string& path) {
    const auto pal = label_palette();
    std::vector<std::uint8_t> px(map.n_pixels() * 3, 0);
    for (std::size_t p = 0; p < map.n_pixels(); ++p) {
        if (!map.is_tissue(p)) continue;
        const auto& c = pal[map.labels[p] % pal.size()];
        px[p * 3 + 0] = c[0];
        px[p * 3 + 1] = c[1];
        px[p * 3 + 2] = c[2];
    }
    write_png_rgb8(path, map.cols, map.rows, px);
}

void write_map_csv(const ScalarMap& map, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f.precision(10);
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            if (c) f << ",";
            const double v = map.values[static_cast<std::size_t>(r) * map.cols + c];
            if (std::isnan(v))
                f << "nan";
            else
                f << v;
        }
        f << "\n";
    }
}

void write_label_csv(const LabelMap& map, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            if (c) f << ",";
            const std::size_t p = static_cast<std::size_t>(r) * map.cols + c;
            if (map.is_tissue(p))
                f << map.labels[p];
            else
                f << "nan";
        }
        f << "\n";
    }
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows,
               const std::vector<std::string>& preamble) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f.precision(17);
    for (const auto& line : preamble) f << "# " << line << "\n";
    f << header << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) f << ",";
            f << row[i];
        }
        f << "\n";
    }
}

CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            t.preamble.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!have_header) {
            while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
            have_header = true;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (...) {
                throw DataError("bad csv cell '" + cell + "' in " + path);
            }
        }
        if (row.size() != t.columns.size())
            throw DataError("csv row width mismatch in " + path);
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw DataError("csv missing header: " + path);
    return t;
}

} // namespace burnmap
