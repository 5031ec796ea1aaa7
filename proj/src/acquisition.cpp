#include "burnmap/acquisition.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "burnmap/io.hpp"
#include "burnmap/rng.hpp"

namespace burnmap {

using nlohmann::json;

// ---- raster plan ---------------------------------------------------------

std::size_t RasterPlan::index_of(int row, int col) const {
    const std::size_t r = static_cast<std::size_t>(row);
    return (row % 2 == 0) ? r * nx + col : r * nx + (nx - 1 - col);
}

RasterPlan plan_raster(double width_mm, double height_mm, double spot_mm,
                       double overlap, double dwell_s, double origin_x_mm,
                       double origin_y_mm) {
    if (!(width_mm > 0.0) || !(height_mm > 0.0))
        throw DataError("plan_raster: region dims must be positive");
    if (!(spot_mm > 0.0)) throw DataError("plan_raster: spot must be positive");
    if (!(overlap >= 0.0 && overlap < 0.5))
        throw DataError("plan_raster: overlap must be in [0, 0.5)");
    if (!(dwell_s > 0.0)) throw DataError("plan_raster: dwell must be positive");

    RasterPlan p;
    p.origin_x_mm = origin_x_mm;
    p.origin_y_mm = origin_y_mm;
    p.width_mm = width_mm;
    p.height_mm = height_mm;
    p.spot_mm = spot_mm;
    p.overlap = overlap;
    p.dwell_s = dwell_s;

    const double step = spot_mm * (1.0 - overlap);
    // Guard against 10/(10*0.1) style quotients landing a hair above an
    // integer.
    auto count_along = [step](double extent) {
        return std::max(1, static_cast<int>(std::ceil(extent / step - 1e-9)));
    };
    p.nx = count_along(width_mm);
    p.ny = count_along(height_mm);

    auto coord = [&](int i, int n, double origin, double extent) {
        if (n == 1) return origin + extent / 2.0; // degenerate: spot covers region
        return origin + spot_mm / 2.0 + i * step;
    };
    p.positions_mm.reserve(static_cast<std::size_t>(p.nx) * p.ny);
    for (int r = 0; r < p.ny; ++r) {
        const double y = coord(r, p.ny, origin_y_mm, height_mm);
        if (r % 2 == 0) {
            for (int c = 0; c < p.nx; ++c)
                p.positions_mm.push_back({coord(c, p.nx, origin_x_mm, width_mm), y});
        } else {
            for (int c = p.nx - 1; c >= 0; --c)
                p.positions_mm.push_back({coord(c, p.nx, origin_x_mm, width_mm), y});
        }
    }
    return p;
}

std::string RasterPlan::to_json() const {
    json j;
    j["origin_mm"] = {origin_x_mm, origin_y_mm};
    j["width_mm"] = width_mm;
    j["height_mm"] = height_mm;
    j["spot_mm"] = spot_mm;
    j["overlap"] = overlap;
    j["dwell_s"] = dwell_s;
    j["nx"] = nx;
    j["ny"] = ny;
    j["order"] = order;
    auto& pos = j["positions_mm"] = json::array();
    for (const auto& p : positions_mm) pos.push_back({p[0], p[1]});
    return j.dump(2);
}

RasterPlan RasterPlan::from_json(const std::string& text) {
    json j = json::parse(text);
    RasterPlan p;
    p.origin_x_mm = j.at("origin_mm")[0].get<double>();
    p.origin_y_mm = j.at("origin_mm")[1].get<double>();
    p.width_mm = j.at("width_mm").get<double>();
    p.height_mm = j.at("height_mm").get<double>();
    p.spot_mm = j.at("spot_mm").get<double>();
    p.overlap = j.at("overlap").get<double>();
    p.dwell_s = j.at("dwell_s").get<double>();
    p.nx = j.at("nx").get<int>();
    p.ny = j.at("ny").get<int>();
    p.order = j.value("order", "serpentine");
    for (const auto& pos : j.at("positions_mm"))
        p.positions_mm.push_back({pos[0].get<double>(), pos[1].get<double>()});
    return p;
}

// ---- references / tof ----------------------------------------------------

void ReferencePair::validate() const {
    if (wavelengths_nm.size() != dark.size() || dark.size() != white.size())
        throw DataError("reference pair: column sizes differ");
    if (dark.empty()) throw DataError("reference pair: empty");
    for (std::size_t i = 0; i < dark.size(); ++i)
        if (!(white[i] > dark[i]))
            throw DataError("calibration error: white <= dark at band " +
                            std::to_string(i) + " (" +
                            std::to_string(wavelengths_nm[i]) + " nm)");
}

void ReferencePair::save_csv(const std::string& path) const {
    std::vector<std::vector<double>> rows(dark.size());
    for (std::size_t i = 0; i < dark.size(); ++i)
        rows[i] = {wavelengths_nm[i], dark[i], white[i]};
    write_csv(path, "wavelength_nm,dark_counts,white_counts", rows);
}

ReferencePair ReferencePair::load_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    if (t.columns.size() != 3) throw DataError("reference csv needs 3 columns");
    ReferencePair r;
    for (const auto& row : t.rows) {
        r.wavelengths_nm.push_back(row[0]);
        r.dark.push_back(row[1]);
        r.white.push_back(row[2]);
    }
    r.validate();
    return r;
}

void TofLog::validate() const {
    if (timestamp_s.size() != distance_mm.size())
        throw DataError("tof log: column sizes differ");
    if (timestamp_s.empty()) throw DataError("tof log: empty");
    for (std::size_t i = 0; i < timestamp_s.size(); ++i) {
        if (i > 0 && timestamp_s[i] <= timestamp_s[i - 1])
            throw DataError("tof log: timestamps not increasing");
        if (std::fabs(distance_mm[i] - d_ref_mm) > kRailLimitMm + 1e-9)
            throw DataError("tof log: distance outside d_ref +- 20 mm rail limit");
    }
}

void TofLog::save_csv(const std::string& path) const {
    std::vector<std::vector<double>> rows(timestamp_s.size());
    for (std::size_t i = 0; i < timestamp_s.size(); ++i)
        rows[i] = {timestamp_s[i], distance_mm[i]};
    write_csv(path, "timestamp_s,distance_mm", rows,
              {"d_ref_mm=" + std::to_string(d_ref_mm)});
}

TofLog TofLog::load_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    if (t.columns.size() != 2) throw DataError("tof csv needs 2 columns");
    TofLog log;
    for (const auto& line : t.preamble) {
        const auto pos = line.find("d_ref_mm=");
        if (pos != std::string::npos)
            log.d_ref_mm = std::stod(line.substr(pos + 9));
    }
    for (const auto& row : t.rows) {
        log.timestamp_s.push_back(row[0]);
        log.distance_mm.push_back(row[1]);
    }
    log.validate();
    return log;
}

// ---- phantom -------------------------------------------------------------

const char* burn_class_name(BurnClass c) {
    switch (c) {
        case BurnClass::Unburned: return "unburned";
        case BurnClass::Superficial: return "superficial";
        case BurnClass::DeepPartial: return "deep-partial";
        case BurnClass::FullThickness: return "full-thickness";
    }
    return "unknown";
}

std::array<ClassWeights, kBurnClasses> default_class_weights() {
    return {{
        {1.00, 0.80, 0.20, 0.30, 0.40}, // unburned
        {0.80, 0.55, 0.28, 0.30, 0.50}, // superficial
        {0.55, 0.32, 0.34, 0.30, 0.65}, // deep-partial
        {0.30, 0.10, 0.40, 0.30, 0.80}, // full-thickness
    }};
}

const std::vector<GaussianLobe>& water_lobes() {
    static const std::vector<GaussianLobe> v = {
        {970.0, 40.0, 0.10}, {1200.0, 55.0, 0.30}, {1450.0, 70.0, 1.00}, {1940.0, 90.0, 1.30}};
    return v;
}
const std::vector<GaussianLobe>& hbo2_lobes() {
    static const std::vector<GaussianLobe> v = {{540.0, 18.0, 0.80}, {577.0, 15.0, 0.70}};
    return v;
}
const std::vector<GaussianLobe>& hb_lobes() {
    static const std::vector<GaussianLobe> v = {{760.0, 35.0, 0.30}};
    return v;
}
const std::vector<GaussianLobe>& lipid_lobes() {
    static const std::vector<GaussianLobe> v = {{930.0, 20.0, 0.10}, {1210.0, 30.0, 0.25}};
    return v;
}
const std::vector<GaussianLobe>& collagen_lobes() {
    static const std::vector<GaussianLobe> v = {{1500.0, 100.0, 0.40}, {2050.0, 90.0, 0.55}};
    return v;
}

namespace {

double lobe_sum(const std::vector<GaussianLobe>& lobes, double lambda_nm) {
    double a = 0.0;
    for (const auto& l : lobes) {
        const double t = (lambda_nm - l.center_nm) / l.sigma_nm;
        a += l.amplitude * std::exp(-0.5 * t * t);
    }
    return a;
}

} // namespace

double phantom_absorption(const ClassWeights& w, double lambda_nm) {
    return w.water * lobe_sum(water_lobes(), lambda_nm) +
           w.hbo2 * lobe_sum(hbo2_lobes(), lambda_nm) +
           w.hb * lobe_sum(hb_lobes(), lambda_nm) +
           w.lipid * lobe_sum(lipid_lobes(), lambda_nm) +
           w.collagen * lobe_sum(collagen_lobes(), lambda_nm);
}

void PhantomSpec::validate() const {
    if (rows <= 0 || cols <= 0) throw DataError("phantom dims must be positive");
    if (grid_bands < 2) throw DataError("phantom grid needs >= 2 bands");
    if (!(noise_std >= 0.0)) throw DataError("phantom noise std must be >= 0");
    auto check = [](double w, const char* name) {
        if (!(w >= 0.0))
            throw DataError(std::string("phantom weight ") + name + " must be >= 0");
    };
    for (const auto& w : weights) {
        check(w.water, "water");
        check(w.hbo2, "hbo2");
        check(w.hb, "hb");
        check(w.lipid, "lipid");
        check(w.collagen, "collagen");
    }
    if (layout == "custom" &&
        custom_layout.size() != static_cast<std::size_t>(rows) * cols)
        throw DataError("custom layout size must equal rows*cols");
    if (!(breathing.period_s > 0.0)) throw DataError("breathing period must be > 0");
    if (!(breathing.amplitude_mm >= 0.0))
        throw DataError("breathing amplitude must be >= 0");
}

namespace {

std::vector<std::uint16_t> build_layout(const PhantomSpec& spec) {
    const std::size_t n = static_cast<std::size_t>(spec.rows) * spec.cols;
    std::vector<std::uint16_t> lab(n, 0);
    if (spec.layout == "quadrants") {
        for (int r = 0; r < spec.rows; ++r)
            for (int c = 0; c < spec.cols; ++c) {
                const int q = (r >= spec.rows / 2 ? 2 : 0) + (c >= spec.cols / 2 ? 1 : 0);
                lab[static_cast<std::size_t>(r) * spec.cols + c] =
                    static_cast<std::uint16_t>(q);
            }
    } else if (spec.layout == "stripes") {
        for (int r = 0; r < spec.rows; ++r)
            for (int c = 0; c < spec.cols; ++c)
                lab[static_cast<std::size_t>(r) * spec.cols + c] =
                    static_cast<std::uint16_t>((c * kBurnClasses) / spec.cols);
    } else if (spec.layout == "custom") {
        lab = spec.custom_layout;
    } else {
        throw DataError("unknown phantom layout: " + spec.layout);
    }
    // Test phantoms must exercise every class.
    std::array<bool, kBurnClasses> seen{};
    for (auto v : lab) {
        if (v >= kBurnClasses) throw DataError("layout label out of range");
        seen[v] = true;
    }
    for (int c = 0; c < kBurnClasses; ++c)
        if (!seen[c])
            throw DataError(std::string("layout missing class ") +
                            burn_class_name(static_cast<BurnClass>(c)));
    return lab;
}

} // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    const auto grid =
        WavelengthGrid::linspace(spec.grid_lo_nm, spec.grid_hi_nm, spec.grid_bands);
    const auto layout = build_layout(spec);

    // Class spectra are shared; noise is per pixel.
    const std::size_t nb = grid.size();
    std::vector<double> class_r(kBurnClasses * nb);
    for (int c = 0; c < kBurnClasses; ++c)
        for (std::size_t b = 0; b < nb; ++b)
            class_r[c * nb + b] =
                std::exp(-phantom_absorption(spec.weights[c], grid[b]));

    Phantom ph{HyperCube(spec.rows, spec.cols, grid, Quantity::Reflectance),
               LabelMap(spec.rows, spec.cols, kBurnClasses)};
    ph.labels.labels = layout;

    const std::size_t np = ph.truth.n_pixels();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        // Per-pixel RNG stream keeps the cube bit-identical for any thread
        // count.
        Rng rng(spec.seed ^ (static_cast<std::uint64_t>(p) * 0x9e3779b97f4a7c15ull) ^
                0xb5297a4d3f84d5a3ull);
        const std::uint16_t cls = layout[p];
        double* out = ph.truth.pixel(p);
        const double* base = class_r.data() + cls * nb;
        for (std::size_t b = 0; b < nb; ++b) {
            double v = base[b];
            if (spec.noise_std > 0.0) v += spec.noise_std * rng.normal();
            out[b] = std::max(v, 0.0);
        }
    }

    // Fiducials: near-black squares over whatever class is underneath.
    for (const auto& f : spec.fiducials) {
        for (int dr = 0; dr < f.size; ++dr)
            for (int dc = 0; dc < f.size; ++dc) {
                const int r = f.row + dr, c = f.col + dc;
                if (r < 0 || r >= spec.rows || c < 0 || c >= spec.cols) continue;
                double* out = ph.truth.pixel(ph.truth.pixel_index(r, c));
                for (std::size_t b = 0; b < nb; ++b) out[b] = 0.002;
            }
    }

    ph.truth.provenance.push_back("generate_phantom");
    return ph;
}

// ---- scan simulation -----------------------------------------------------

ReferencePair make_references(const WavelengthGrid& grid) {
    ReferencePair r;
    r.wavelengths_nm = grid.values();
    r.dark.resize(grid.size());
    r.white.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double lam = grid[i];
        r.dark[i] = 100.0 + 20.0 * (lam - 400.0) / 1700.0;
        const double t = (lam - 900.0) / 600.0;
        r.white[i] = 3000.0 + 800.0 * std::exp(-t * t);
    }
    r.validate();
    return r;
}

ScanResult simulate_scan(const HyperCube& truth, const RasterPlan& plan,
                         const PhantomSpec& spec, double d_ref_mm) {
    if (plan.nx != truth.cols || plan.ny != truth.rows)
        throw DataError("simulate_scan: plan grid does not cover the cube footprint");
    if (!(d_ref_mm > 0.0)) throw DataError("simulate_scan: d_ref must be positive");
    if (spec.breathing.amplitude_mm > TofLog::kRailLimitMm)
        throw DataError("simulate_scan: breathing amplitude exceeds rail limit");

    ScanResult out{HyperCube(truth.rows, truth.cols, truth.grid, Quantity::Counts),
                   make_references(truth.grid), TofLog{}};
    out.raw.mask = truth.mask;
    out.raw.provenance = truth.provenance;
    out.raw.provenance.push_back("simulate_scan");
    out.raw.config_hash = truth.config_hash;

    const double amp = spec.breathing.amplitude_mm;
    const double period = spec.breathing.period_s;
    auto distance_at = [&](double t) {
        return d_ref_mm + amp * std::sin(2.0 * M_PI * t / period);
    };

    const std::size_t nb = truth.bands();
    const std::size_t np = truth.n_pixels();
    const auto& dark = out.refs.dark;
    const auto& white = out.refs.white;
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        const int r = static_cast<int>(p) / truth.cols;
        const int c = static_cast<int>(p) % truth.cols;
        const double t = plan.dwell_midpoint_s(plan.index_of(r, c));
        const double d = distance_at(t);
        const double f = (d_ref_mm / d) * (d_ref_mm / d);
        const double* tr = truth.pixel(p);
        double* raw = out.raw.pixel(p);
        for (std::size_t b = 0; b < nb; ++b)
            raw[b] = dark[b] + tr[b] * (white[b] - dark[b]) * f;
    }

    out.tof.d_ref_mm = d_ref_mm;
    const double duration = plan.duration_s();
    const int samples = static_cast<int>(std::floor(duration * 10.0)) + 1;
    for (int k = 0; k < samples; ++k) {
        const double t = k / 10.0;
        out.tof.timestamp_s.push_back(t);
        out.tof.distance_mm.push_back(distance_at(t));
    }
    return out;
}

HyperCube tof_compensate(const HyperCube& raw, const TofLog& tof,
                         const RasterPlan& plan, const ReferencePair& refs) {
    tof.validate();
    refs.validate();
    if (raw.quantity != Quantity::Counts)
        throw DataError("tof_compensate expects a counts cube");
    if (refs.dark.size() != raw.bands())
        throw DataError("tof_compensate: reference band count mismatch");
    if (plan.nx != raw.cols || plan.ny != raw.rows)
        throw DataError("tof_compensate: plan grid does not match the cube");
    for (std::size_t i = 1; i < tof.timestamp_s.size(); ++i)
        if (tof.timestamp_s[i] - tof.timestamp_s[i - 1] > TofLog::kMaxGapS + 1e-9)
            throw DataError("tof log gap > 0.2 s during scan");
    const double t_last = plan.dwell_midpoint_s(plan.count() - 1);
    if (tof.timestamp_s.back() + TofLog::kMaxGapS < t_last)
        throw DataError("tof log does not span the scan duration");

    HyperCube out(raw.rows, raw.cols, raw.grid, Quantity::Counts);
    out.mask = raw.mask;
    out.provenance = raw.provenance;
    out.provenance.push_back("tof_compensate");
    out.config_hash = raw.config_hash;

    const std::size_t nb = raw.bands();
    const std::size_t np = raw.n_pixels();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        const int r = static_cast<int>(p) / raw.cols;
        const int c = static_cast<int>(p) % raw.cols;
        const double t = plan.dwell_midpoint_s(plan.index_of(r, c));
        // Nearest log sample; the log is sorted.
        auto it = std::lower_bound(tof.timestamp_s.begin(), tof.timestamp_s.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - tof.timestamp_s.begin());
        std::size_t best = hi;
        if (hi == tof.timestamp_s.size()) {
            best = hi - 1;
        } else if (hi > 0 && t - tof.timestamp_s[hi - 1] <= tof.timestamp_s[hi] - t) {
            best = hi - 1;
        }
        const double d = tof.distance_mm[best];
        const double f = (d / tof.d_ref_mm) * (d / tof.d_ref_mm);
        const double* in = raw.pixel(p);
        double* o = out.pixel(p);
        for (std::size_t b = 0; b < nb; ++b)
            o[b] = refs.dark[b] + (in[b] - refs.dark[b]) * f;
    }
    return out;
}

HyperCube counts_to_reflectance(const HyperCube& raw, const ReferencePair& refs) {
    refs.validate();
    if (raw.quantity != Quantity::Counts)
        throw DataError("counts_to_reflectance expects a counts cube");
    if (refs.dark.size() != raw.bands())
        throw DataError("counts_to_reflectance: reference band count mismatch");

    HyperCube out(raw.rows, raw.cols, raw.grid, Quantity::Reflectance);
    out.mask = raw.mask;
    out.provenance = raw.provenance;
    out.provenance.push_back("counts_to_reflectance");
    out.config_hash = raw.config_hash;

    const std::size_t nb = raw.bands();
    const std::size_t np = raw.n_pixels();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        const double* in = raw.pixel(p);
        double* o = out.pixel(p);
        for (std::size_t b = 0; b < nb; ++b)
            o[b] = std::max((in[b] - refs.dark[b]) / (refs.white[b] - refs.dark[b]), 0.0);
    }
    return out;
}

std::string PhantomSpec::to_json() const {
    json j;
    j["rows"] = rows;
    j["cols"] = cols;
    j["grid"] = {{"lo_nm", grid_lo_nm}, {"hi_nm", grid_hi_nm}, {"bands", grid_bands}};
    j["layout"] = layout;
    if (!custom_layout.empty()) j["custom_layout"] = custom_layout;
    auto wj = json::array();
    for (int c = 0; c < kBurnClasses; ++c) {
        const auto& w = weights[c];
        wj.push_back({{"class", burn_class_name(static_cast<BurnClass>(c))},
                      {"water", w.water},
                      {"hbo2", w.hbo2},
                      {"hb", w.hb},
                      {"lipid", w.lipid},
                      {"collagen", w.collagen}});
    }
    j["class_weights"] = wj;
    j["noise_std"] = noise_std;
    auto fj = json::array();
    for (const auto& f : fiducials)
        fj.push_back({{"row", f.row}, {"col", f.col}, {"size", f.size}});
    j["fiducials"] = fj;
    j["breathing"] = {{"amplitude_mm", breathing.amplitude_mm},
                      {"period_s", breathing.period_s}};
    j["seed"] = seed;
    return j.dump(2);
}

PhantomSpec PhantomSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad phantom spec json: ") + e.what());
    }
    PhantomSpec s;
    s.rows = j.value("rows", s.rows);
    s.cols = j.value("cols", s.cols);
    if (j.contains("grid")) {
        s.grid_lo_nm = j["grid"].value("lo_nm", s.grid_lo_nm);
        s.grid_hi_nm = j["grid"].value("hi_nm", s.grid_hi_nm);
        s.grid_bands = j["grid"].value("bands", s.grid_bands);
    }
    s.layout = j.value("layout", s.layout);
    if (j.contains("custom_layout"))
        s.custom_layout = j["custom_layout"].get<std::vector<std::uint16_t>>();
    if (j.contains("class_weights")) {
        for (const auto& wj : j["class_weights"]) {
            const std::string name = wj.at("class").get<std::string>();
            int idx = -1;
            for (int c = 0; c < kBurnClasses; ++c)
                if (name == burn_class_name(static_cast<BurnClass>(c))) idx = c;
            if (idx < 0) throw ConfigError("unknown phantom class: " + name);
            auto& w = s.weights[idx];
            w.water = wj.value("water", w.water);
            w.hbo2 = wj.value("hbo2", w.hbo2);
            w.hb = wj.value("hb", w.hb);
            w.lipid = wj.value("lipid", w.lipid);
            w.collagen = wj.value("collagen", w.collagen);
        }
    }
    s.noise_std = j.value("noise_std", s.noise_std);
    if (j.contains("fiducials")) {
        for (const auto& fj : j["fiducials"])
            s.fiducials.push_back({fj.value("row", 0), fj.value("col", 0), fj.value("size", 3)});
    }
    if (j.contains("breathing")) {
        s.breathing.amplitude_mm = j["breathing"].value("amplitude_mm", 0.0);
        s.breathing.period_s = j["breathing"].value("period_s", 5.0);
    }
    s.seed = j.value("seed", std::uint64_t{0});
    s.validate();
    return s;
}

} // namespace burnmap
