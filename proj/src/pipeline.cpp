#include "burnmap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "burnmap/clustering.hpp"
#include "burnmap/io.hpp"
#include "burnmap/lsci.hpp"
#include "burnmap/preprocess.hpp"

namespace burnmap {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string read_text(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << text;
}

void require_artifact(const std::string& base, const std::string& producer) {
    if (!fs::exists(base + ".hdr.json") && !fs::exists(base))
        throw DataError("missing artifact " + base + "; run `burnmap " + producer +
                        "` first");
}

void check_hash(const std::string& artifact_hash, const PipelineConfig& cfg,
                const std::string& what) {
    if (!artifact_hash.empty() && artifact_hash != cfg.hash())
        throw DataError(what + " was produced by a different config (hash " +
                        artifact_hash + " != " + cfg.hash() + "); rerun upstream commands");
}

} // namespace

std::uint64_t PipelineConfig::seed_for(const char* tag) const {
    return seed ^ fnv1a64(tag);
}

std::string PipelineConfig::artifact(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
}

void PipelineConfig::validate() const {
    phantom.validate();
    if (!(spot_mm > 0.0) || !(dwell_s > 0.0))
        throw ConfigError("config: spot and dwell must be positive");
    if (!(overlap >= 0.0 && overlap < 0.5))
        throw ConfigError("config: overlap must be in [0, 0.5)");
    if (!(crop_lo_nm < crop_hi_nm)) throw ConfigError("config: bad crop window");
    if (!(mask_lo < mask_hi)) throw ConfigError("config: bad mask thresholds");
    if (smooth_window < 3 || smooth_window % 2 == 0 || smooth_polyorder < 1 ||
        smooth_polyorder >= smooth_window)
        throw ConfigError("config: bad smoothing window/polyorder");
    dtwi_params.validate();
    if (!(sto2_lo_nm < sto2_hi_nm)) throw ConfigError("config: bad sto2 window");
    if (deriv_order < 1 || deriv_order > 2)
        throw ConfigError("config: derivative order must be 1 or 2");
    if (lsci_mode != "temporal" && lsci_mode != "spatial")
        throw ConfigError("config: lsci mode must be temporal or spatial");
    if (lsci_frames < 2) throw ConfigError("config: lsci needs >= 2 frames");
    if (lsci_window < 3 || lsci_window % 2 == 0)
        throw ConfigError("config: lsci window must be odd and >= 3");
    for (const double f : class_flow)
        if (!(f >= 0.0)) throw ConfigError("config: class flow must be >= 0");
    cae_vnir.validate();
    cae_swir.validate();
    if (cluster_k < 2) throw ConfigError("config: cluster k must be >= 2");
    if (cluster_max_n < cluster_k) throw ConfigError("config: cluster max_n < k");
    if (cluster_space != "bands" && cluster_space != "pca" && cluster_space != "tsne")
        throw ConfigError("config: cluster space must be bands, pca or tsne");
    if (cluster_smooth_radius < 0)
        throw ConfigError("config: smooth radius must be >= 0");
}

std::string PipelineConfig::to_json() const {
    json j;
    j["out_dir"] = out_dir;
    j["seed"] = seed;
    j["phantom"] = json::parse(phantom.to_json());
    j["scan"] = {{"spot_mm", spot_mm},
                 {"overlap", overlap},
                 {"dwell_s", dwell_s},
                 {"d_ref_mm", d_ref_mm}};
    json smooth = {{"window", smooth_window}, {"polyorder", smooth_polyorder}};
    if (!smooth_regions.empty()) {
        auto regions = json::array();
        for (const auto& r : smooth_regions)
            regions.push_back({{"lo_nm", r.lo_nm},
                               {"hi_nm", r.hi_nm},
                               {"window", r.window},
                               {"polyorder", r.polyorder}});
        smooth["regions"] = regions;
    }
    j["preprocess"] = {{"crop_nm", {crop_lo_nm, crop_hi_nm}},
                       {"mask", {{"low", mask_lo}, {"high", mask_hi}}},
                       {"smooth", smooth},
                       {"fiducials_csv", fiducials_csv}};
    j["indices"] = {{"dtwi", {{"s1", dtwi_params.s1}, {"s2", dtwi_params.s2}}},
                    {"sto2",
                     {{"window_nm", {sto2_lo_nm, sto2_hi_nm}},
                      {"extinction_csv", extinction_csv}}},
                    {"derivative",
                     {{"order", deriv_order},
                      {"window", deriv_window},
                      {"polyorder", deriv_polyorder}}}};
    j["lsci"] = {{"mode", lsci_mode},
                 {"window", lsci_window},
                 {"frames", lsci_frames},
                 {"exposure_s", lsci_exposure_s},
                 {"rate_hz", lsci_rate_hz},
                 {"class_flow", class_flow}};
    auto cae_json = [](const TrainConfig& c) {
        return json{{"epochs", c.epochs},
                    {"learning_rate", c.learning_rate},
                    {"batch_size", c.batch_size},
                    {"t_start", c.t_start},
                    {"t_end", c.t_end},
                    {"val_fraction", c.val_fraction}};
    };
    j["cae"] = {{"split_nm", split_nm},
                {"vnir", cae_json(cae_vnir)},
                {"swir", cae_json(cae_swir)}};
    j["cluster"] = {{"k", cluster_k},
                    {"max_n", cluster_max_n},
                    {"smooth_radius", cluster_smooth_radius},
                    {"feature_space", cluster_space},
                    {"tsne", {{"perplexity", tsne_perplexity}, {"iters", tsne_iters}}}};
    return j.dump(2);
}

std::string PipelineConfig::hash() const {
    std::ostringstream ss;
    ss << std::hex << fnv1a64(to_json());
    return ss.str();
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    PipelineConfig c;
    try {
        c.out_dir = j.value("out_dir", c.out_dir);
        c.seed = j.value("seed", c.seed);
        if (j.contains("phantom")) c.phantom = PhantomSpec::from_json(j["phantom"].dump());
        if (j.contains("scan")) {
            const auto& s = j["scan"];
            c.spot_mm = s.value("spot_mm", c.spot_mm);
            c.overlap = s.value("overlap", c.overlap);
            c.dwell_s = s.value("dwell_s", c.dwell_s);
            c.d_ref_mm = s.value("d_ref_mm", c.d_ref_mm);
        }
        if (j.contains("preprocess")) {
            const auto& p = j["preprocess"];
            if (p.contains("crop_nm")) {
                c.crop_lo_nm = p["crop_nm"][0].get<double>();
                c.crop_hi_nm = p["crop_nm"][1].get<double>();
            }
            if (p.contains("mask")) {
                c.mask_lo = p["mask"].value("low", c.mask_lo);
                c.mask_hi = p["mask"].value("high", c.mask_hi);
            }
            if (p.contains("smooth")) {
                c.smooth_window = p["smooth"].value("window", c.smooth_window);
                c.smooth_polyorder = p["smooth"].value("polyorder", c.smooth_polyorder);
                if (p["smooth"].contains("regions")) {
                    for (const auto& r : p["smooth"]["regions"])
                        c.smooth_regions.push_back({r.at("lo_nm").get<double>(),
                                                    r.at("hi_nm").get<double>(),
                                                    r.at("window").get<int>(),
                                                    r.at("polyorder").get<int>()});
                }
            }
            c.fiducials_csv = p.value("fiducials_csv", c.fiducials_csv);
        }
        if (j.contains("indices")) {
            const auto& idx = j["indices"];
            if (idx.contains("dtwi")) {
                c.dtwi_params.s1 = idx["dtwi"].value("s1", c.dtwi_params.s1);
                c.dtwi_params.s2 = idx["dtwi"].value("s2", c.dtwi_params.s2);
            }
            if (idx.contains("sto2")) {
                if (idx["sto2"].contains("window_nm")) {
                    c.sto2_lo_nm = idx["sto2"]["window_nm"][0].get<double>();
                    c.sto2_hi_nm = idx["sto2"]["window_nm"][1].get<double>();
                }
                c.extinction_csv = idx["sto2"].value("extinction_csv", c.extinction_csv);
            }
            if (idx.contains("derivative")) {
                c.deriv_order = idx["derivative"].value("order", c.deriv_order);
                c.deriv_window = idx["derivative"].value("window", c.deriv_window);
                c.deriv_polyorder =
                    idx["derivative"].value("polyorder", c.deriv_polyorder);
            }
        }
        if (j.contains("lsci")) {
            const auto& l = j["lsci"];
            c.lsci_mode = l.value("mode", c.lsci_mode);
            c.lsci_window = l.value("window", c.lsci_window);
            c.lsci_frames = l.value("frames", c.lsci_frames);
            c.lsci_exposure_s = l.value("exposure_s", c.lsci_exposure_s);
            c.lsci_rate_hz = l.value("rate_hz", c.lsci_rate_hz);
            if (l.contains("class_flow")) {
                const auto flows = l["class_flow"].get<std::vector<double>>();
                if (flows.size() != kBurnClasses)
                    throw ConfigError("config: class_flow needs 4 entries");
                std::copy(flows.begin(), flows.end(), c.class_flow.begin());
            }
        }
        if (j.contains("cae")) {
            const auto& a = j["cae"];
            c.split_nm = a.value("split_nm", c.split_nm);
            auto load_tc = [](const json& t, TrainConfig& tc) {
                tc.epochs = t.value("epochs", tc.epochs);
                tc.learning_rate = t.value("learning_rate", tc.learning_rate);
                tc.batch_size = t.value("batch_size", tc.batch_size);
                tc.t_start = t.value("t_start", tc.t_start);
                tc.t_end = t.value("t_end", tc.t_end);
                tc.val_fraction = t.value("val_fraction", tc.val_fraction);
            };
            if (a.contains("vnir")) load_tc(a["vnir"], c.cae_vnir);
            if (a.contains("swir")) load_tc(a["swir"], c.cae_swir);
        }
        if (j.contains("cluster")) {
            const auto& cl = j["cluster"];
            c.cluster_k = cl.value("k", c.cluster_k);
            c.cluster_max_n = cl.value("max_n", c.cluster_max_n);
            c.cluster_smooth_radius = cl.value("smooth_radius", c.cluster_smooth_radius);
            c.cluster_space = cl.value("feature_space", c.cluster_space);
            if (cl.contains("tsne")) {
                c.tsne_perplexity = cl["tsne"].value("perplexity", c.tsne_perplexity);
                c.tsne_iters = cl["tsne"].value("iters", c.tsne_iters);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    try {
        c.validate();
    } catch (const DataError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    return from_json_text(read_text(path));
}

// ---- commands --------------------------------------------------------------

namespace {

PhantomSpec effective_phantom_spec(const PipelineConfig& cfg) {
    PhantomSpec spec = cfg.phantom;
    spec.seed = cfg.seed_for("phantom");
    return spec;
}

RasterPlan derive_plan(const PipelineConfig& cfg) {
    // Region sized so the raster grid matches the phantom pixel grid exactly.
    const double step = cfg.spot_mm * (1.0 - cfg.overlap);
    return plan_raster(cfg.phantom.cols * step, cfg.phantom.rows * step, cfg.spot_mm,
                       cfg.overlap, cfg.dwell_s);
}

ExtinctionTable load_extinction(const PipelineConfig& cfg) {
    if (cfg.extinction_csv.empty()) return ExtinctionTable::builtin();
    return ExtinctionTable::load_csv(cfg.extinction_csv);
}

} // namespace

void cmd_phantom(const PipelineConfig& cfg, std::ostream& log) {
    fs::create_directories(cfg.out_dir);
    Phantom ph = generate_phantom(effective_phantom_spec(cfg));
    ph.truth.config_hash = cfg.hash();
    ph.labels.config_hash = cfg.hash();
    write_cube(ph.truth, cfg.artifact("truth"));
    write_label_map(ph.labels, cfg.artifact("truth_labels"));
    write_text(cfg.artifact("phantom_spec.json"), effective_phantom_spec(cfg).to_json());
    log << "phantom: " << cfg.phantom.rows << "x" << cfg.phantom.cols << "x"
        << cfg.phantom.grid_bands << " cube -> " << cfg.artifact("truth") << "\n";
}

void cmd_scan(const PipelineConfig& cfg, std::ostream& log) {
    require_artifact(cfg.artifact("truth"), "phantom");
    const HyperCube truth = read_cube(cfg.artifact("truth"));
    check_hash(truth.config_hash, cfg, "truth cube");
    const RasterPlan plan = derive_plan(cfg);
    ScanResult scan = simulate_scan(truth, plan, effective_phantom_spec(cfg), cfg.d_ref_mm);
    scan.raw.config_hash = cfg.hash();
    write_cube(scan.raw, cfg.artifact("raw"));
    scan.refs.save_csv(cfg.artifact("refs.csv"));
    scan.tof.save_csv(cfg.artifact("tof.csv"));
    write_text(cfg.artifact("raster_plan.json"), plan.to_json());
    log << "scan: " << plan.count() << " positions, " << plan.duration_s()
        << " s dwell total -> " << cfg.artifact("raw") << "\n";
}

void cmd_calibrate(const PipelineConfig& cfg, std::ostream& log) {
    require_artifact(cfg.artifact("raw"), "scan");
    require_artifact(cfg.artifact("refs.csv"), "scan");
    require_artifact(cfg.artifact("tof.csv"), "scan");
    require_artifact(cfg.artifact("raster_plan.json"), "scan");
    const HyperCube raw = read_cube(cfg.artifact("raw"));
    check_hash(raw.config_hash, cfg, "raw cube");
    const ReferencePair refs = ReferencePair::load_csv(cfg.artifact("refs.csv"));
    const TofLog tof = TofLog::load_csv(cfg.artifact("tof.csv"));
    const RasterPlan plan = RasterPlan::from_json(read_text(cfg.artifact("raster_plan.json")));

    const HyperCube compensated = tof_compensate(raw, tof, plan, refs);
    HyperCube reflectance = counts_to_reflectance(compensated, refs);
    reflectance.config_hash = cfg.hash();
    write_cube(reflectance, cfg.artifact("reflectance"));
    log << "calibrate: reflectance cube -> " << cfg.artifact("reflectance") << "\n";
}

void cmd_preprocess(const PipelineConfig& cfg, std::ostream& log) {
    require_artifact(cfg.artifact("reflectance"), "calibrate");
    HyperCube cube = read_cube(cfg.artifact("reflectance"));
    check_hash(cube.config_hash, cfg, "reflectance cube");

    cube = crop_bands(cube, cfg.crop_lo_nm, cfg.crop_hi_nm);
    cube = mask_background(cube, cfg.mask_lo, cfg.mask_hi);
    cube = cfg.smooth_regions.empty()
               ? smooth_spectra(cube, cfg.smooth_window, cfg.smooth_polyorder)
               : smooth_spectra(cube, cfg.smooth_regions);
    cube.config_hash = cfg.hash();
    write_cube(cube, cfg.artifact("preproc_physio"));

    HyperCube norm = zscore_bands(l2_normalize(cube));
    norm.config_hash = cfg.hash();
    write_cube(norm, cfg.artifact("preproc_norm"));
    log << "preprocess: " << cube.count_unmasked() << "/" << cube.n_pixels()
        << " tissue pixels, " << cube.bands() << " bands\n";
}

void cmd_maps(const PipelineConfig& cfg, std::ostream& log) {
    require_artifact(cfg.artifact("preproc_physio"), "preprocess");
    const HyperCube cube = read_cube(cfg.artifact("preproc_physio"));
    check_hash(cube.config_hash, cfg, "preprocessed cube");

    const HyperCube absorb = absorbance(cube);
    ScalarMap dtwi_map = dtwi(absorb, cfg.dtwi_params);
    dtwi_map.config_hash = cfg.hash();
    write_scalar_map(dtwi_map, cfg.artifact("dtwi"));

    const ExtinctionTable table = load_extinction(cfg);
    ScalarMap sto2_map = sto2(absorb, table, cfg.sto2_lo_nm, cfg.sto2_hi_nm);
    sto2_map.config_hash = cfg.hash();
    write_scalar_map(sto2_map, cfg.artifact("sto2"));

    HyperCube deriv = spectral_derivative(absorb, cfg.deriv_order, cfg.deriv_window,
                                          cfg.deriv_polyorder);
    deriv.config_hash = cfg.hash();
    write_cube(deriv, cfg.artifact("derivative"));
    log << "maps: dtwi, sto2, derivative (order " << cfg.deriv_order << ")\n";
}

void cmd_lsci(const PipelineConfig& cfg, std::ostream& log) {
    require_artifact(cfg.artifact("truth_labels"), "phantom");
    const LabelMap labels = read_label_map(cfg.artifact("truth_labels"));
    check_hash(labels.config_hash, cfg, "truth labels");

    FlowMap flow(labels.rows, labels.cols);
    for (std::size_t p = 0; p < labels.n_pixels(); ++p)
        flow.flow[p] = cfg.class_flow[labels.labels[p]];

    const FrameStack stack =
        simulate_speckle(flow, cfg.lsci_frames, cfg.seed_for("lsci"),
                         cfg.lsci_exposure_s, cfg.lsci_rate_hz);
    write_frame_stack(stack, cfg.artifact("frames"));

    ScalarMap contrast = (cfg.lsci_mode == "temporal")
                             ? temporal_contrast(stack)
                             : spatial_contrast(stack, cfg.lsci_window);

    // Register onto HSI coordinates when fiducial pairs are provided.
    if (!cfg.fiducials_csv.empty()) {
        const auto [src, dst] = load_point_pairs_csv(cfg.fiducials_csv);
        const AffineTransform2D T = fit_affine(src, dst);
        contrast = warp_map(contrast, T);
    }
    contrast.config_hash = cfg.hash();
    write_scalar_map(contrast, cfg.artifact("k_map"));

    ScalarMap perfusion = perfusion_index(contrast);
    perfusion.config_hash = cfg.hash();
    write_scalar_map(perfusion, cfg.artifact("perfusion"));
    log << "lsci: " << cfg.lsci_mode << " contrast over " << cfg.lsci_frames
        << " frames\n";
}

void cmd_train_cae(const PipelineConfig& cfg, std::ostream& log) {
    require_artifact(cfg.artifact("preproc_norm"), "preprocess");
    const HyperCube cube = read_cube(cfg.artifact("preproc_norm"));
    check_hash(cube.config_hash, cfg, "normalized cube");

    // Flatten unmasked pixels.
    std::vector<std::size_t> live;
    for (std::size_t p = 0; p < cube.n_pixels(); ++p)
        if (cube.is_tissue(p)) live.push_back(p);
    const int n = static_cast<int>(live.size());
    if (n < 10) throw DataError("train-cae: too few tissue pixels");

    // Split the spectral axis per spectrometer.
    std::vector<std::size_t> vnir_idx, swir_idx;
    for (std::size_t b = 0; b < cube.bands(); ++b)
        (cube.grid[b] < cfg.split_nm ? vnir_idx : swir_idx).push_back(b);
    if (vnir_idx.size() < CaeModel::kSelected || swir_idx.size() < CaeModel::kSelected)
        throw DataError("train-cae: need >= 5 bands on each side of the split");

    auto gather = [&](const std::vector<std::size_t>& idx, std::vector<double>& data,
                      std::vector<double>& nm) {
        data.resize(live.size() * idx.size());
        nm.resize(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) nm[j] = cube.grid[idx[j]];
        for (std::size_t i = 0; i < live.size(); ++i) {
            const double* px = cube.pixel(live[i]);
            for (std::size_t j = 0; j < idx.size(); ++j)
                data[i * idx.size() + j] = px[idx[j]];
        }
    };

    std::vector<double> vnir_data, vnir_nm, swir_data, swir_nm;
    gather(vnir_idx, vnir_data, vnir_nm);
    gather(swir_idx, swir_data, swir_nm);

    TrainConfig tc_v = cfg.cae_vnir;
    tc_v.seed = cfg.seed_for("cae-vnir");
    TrainConfig tc_s = cfg.cae_swir;
    tc_s.seed = cfg.seed_for("cae-swir");

    const TrainResult vnir =
        train_cae(vnir_data, n, static_cast<int>(vnir_idx.size()), vnir_nm, tc_v);
    const TrainResult swir =
        train_cae(swir_data, n, static_cast<int>(swir_idx.size()), swir_nm, tc_s);

    write_text(cfg.artifact("cae_vnir.json"), train_result_to_json(vnir, tc_v));
    write_text(cfg.artifact("cae_swir.json"), train_result_to_json(swir, tc_s));

    const std::vector<double> bands = selected_wavelengths(vnir.model, swir.model);
    json bj;
    bj["bands_nm"] = bands;
    bj["config_hash"] = cfg.hash();
    bj["val_mse"] = {{"vnir", vnir.history.val_mse.back()},
                     {"swir", swir.history.val_mse.back()}};
    write_text(cfg.artifact("bands.json"), bj.dump(2));

    log << "train-cae: vnir d=" << vnir_idx.size() << " val=" << vnir.history.val_mse.back()
        << ", swir d=" << swir_idx.size() << " val=" << swir.history.val_mse.back()
        << "\nselected bands:";
    for (const double b : bands) log << " " << b;
    log << "\n";
}

namespace {

LabelMap cluster_feature_space(const PipelineConfig& cfg, const HyperCube& tenband,
                               const HyperCube& norm_cube) {
    const std::uint64_t seed = cfg.seed_for("cluster");
    if (cfg.cluster_space == "bands")
        return subsample_and_extend(tenband, cfg.cluster_max_n, cfg.cluster_k, seed);

    std::vector<std::size_t> live;
    for (std::size_t p = 0; p < tenband.n_pixels(); ++p)
        if (tenband.is_tissue(p)) live.push_back(p);
    const int n = static_cast<int>(live.size());
    if (n < cfg.cluster_k) throw DataError("cluster: fewer pixels than clusters");

    if (cfg.cluster_space == "pca") {
        // Cosine affinity on top-10 PCA scores of the full normalized cube.
        const int d = static_cast<int>(norm_cube.bands());
        std::vector<double> data(static_cast<std::size_t>(n) * d);
        for (int i = 0; i < n; ++i)
            std::copy_n(norm_cube.pixel(live[i]), d,
                        data.data() + static_cast<std::size_t>(i) * d);
        const int p10 = std::min(10, d);
        const PcaModel pca = pca_fit(data, n, d, p10);
        const std::vector<double> scores = pca_project(pca, data, n);
        HyperCube score_cube(tenband.rows, tenband.cols,
                             WavelengthGrid::linspace(400.0, 400.0 + p10, p10 < 2 ? 2 : p10),
                             Quantity::Normalized);
        score_cube.mask = tenband.mask;
        for (int i = 0; i < n; ++i)
            std::copy_n(scores.data() + static_cast<std::size_t>(i) * p10, p10,
                        score_cube.pixel(live[i]));
        return subsample_and_extend(score_cube, cfg.cluster_max_n, cfg.cluster_k, seed);
    }

    // tsne: embed a subsample, k-means in embedding space, extend by cosine
    // similarity in band space.
    const int limit = std::min(cfg.cluster_max_n, 2000);
    std::vector<std::size_t> sample = live;
    if (n > limit) {
        Rng rng(seed ^ 0x94d049bb133111ebull);
        for (int i = 0; i < limit; ++i) {
            const std::size_t j =
                i + rng.uniform_index(static_cast<std::uint64_t>(sample.size() - i));
            std::swap(sample[i], sample[j]);
        }
        sample.resize(limit);
        std::sort(sample.begin(), sample.end());
    }
    const int m = static_cast<int>(sample.size());
    const int d = static_cast<int>(tenband.bands());
    std::vector<double> feats(static_cast<std::size_t>(m) * d);
    for (int i = 0; i < m; ++i)
        std::copy_n(tenband.pixel(sample[i]), d,
                    feats.data() + static_cast<std::size_t>(i) * d);
    const double perp = std::min(cfg.tsne_perplexity, m / 3.0 - 1.0);
    const std::vector<double> emb = tsne_embed(feats, m, d, std::max(perp, 2.0),
                                               cfg.tsne_iters, seed);
    const KmeansResult km = kmeans(emb, m, 2, cfg.cluster_k, seed);

    LabelMap out(tenband.rows, tenband.cols, cfg.cluster_k);
    for (std::size_t p = 0; p < tenband.n_pixels(); ++p) out.mask[p] = tenband.mask[p];
    for (int i = 0; i < m; ++i)
        out.labels[sample[i]] = static_cast<std::uint16_t>(km.labels[i]);
    if (m == n) return out;

    std::vector<double> means(static_cast<std::size_t>(cfg.cluster_k) * d, 0.0);
    std::vector<int> counts(cfg.cluster_k, 0);
    for (int i = 0; i < m; ++i) {
        counts[km.labels[i]] += 1;
        for (int j = 0; j < d; ++j)
            means[static_cast<std::size_t>(km.labels[i]) * d + j] += feats[static_cast<std::size_t>(i) * d + j];
    }
    for (int c = 0; c < cfg.cluster_k; ++c)
        if (counts[c] > 0)
            for (int j = 0; j < d; ++j) means[static_cast<std::size_t>(c) * d + j] /= counts[c];
    std::vector<std::uint8_t> in_sample(tenband.n_pixels(), 0);
    for (const auto p : sample) in_sample[p] = 1;
    for (const auto p : live) {
        if (in_sample[p]) continue;
        const double* x = tenband.pixel(p);
        double xn = 1e-300;
        for (int j = 0; j < d; ++j) xn += x[j] * x[j];
        int best = 0;
        double best_sim = -2.0;
        for (int c = 0; c < cfg.cluster_k; ++c) {
            const double* mu = means.data() + static_cast<std::size_t>(c) * d;
            double dot = 0.0, mn = 1e-300;
            for (int j = 0; j < d; ++j) {
                dot += x[j] * mu[j];
                mn += mu[j] * mu[j];
            }
            const double sim = dot / std::sqrt(xn * mn);
            if (sim > best_sim) {
                best_sim = sim;
                best = c;
            }
        }
        out.labels[p] = static_cast<std::uint16_t>(best);
    }
    return out;
}

} // namespace

void cmd_cluster(const PipelineConfig& cfg, std::ostream& log) {
    require_artifact(cfg.artifact("preproc_norm"), "preprocess");
    require_artifact(cfg.artifact("bands.json"), "train-cae");
    const HyperCube norm_cube = read_cube(cfg.artifact("preproc_norm"));
    check_hash(norm_cube.config_hash, cfg, "normalized cube");
    const json bj = json::parse(read_text(cfg.artifact("bands.json")));
    check_hash(bj.value("config_hash", ""), cfg, "band list");
    const auto bands = bj.at("bands_nm").get<std::vector<double>>();

    const HyperCube tenband = downsample_to_bands(norm_cube, bands);
    LabelMap labels = cluster_feature_space(cfg, tenband, norm_cube);
    if (cfg.cluster_smooth_radius > 0)
        labels = smooth_labels(labels, cfg.cluster_smooth_radius);
    labels.config_hash = cfg.hash();
    write_label_map(labels, cfg.artifact("cluster_labels"));
    write_label_png(labels, cfg.artifact("cluster_labels.png"));

    json report;
    report["config_hash"] = cfg.hash();
    report["k"] = cfg.cluster_k;
    report["feature_space"] = cfg.cluster_space;
    report["bands_nm"] = bands;
    std::vector<long long> histogram(cfg.cluster_k, 0);
    for (std::size_t p = 0; p < labels.n_pixels(); ++p)
        if (labels.is_tissue(p)) histogram[labels.labels[p]] += 1;
    report["label_histogram"] = histogram;
    if (fs::exists(cfg.artifact("truth_labels") + ".hdr.json")) {
        LabelMap truth = read_label_map(cfg.artifact("truth_labels"));
        truth.mask = labels.mask; // compare over the clustered support
        report["ari_vs_truth"] = adjusted_rand_index(labels, truth);
    }
    write_text(cfg.artifact("cluster_report.json"), report.dump(2));
    log << "cluster: " << cfg.cluster_space << " space, k=" << cfg.cluster_k;
    if (report.contains("ari_vs_truth"))
        log << ", ARI=" << report["ari_vs_truth"].get<double>();
    log << "\n";
}

void cmd_report(const PipelineConfig& cfg, std::ostream& log) {
    require_artifact(cfg.artifact("dtwi"), "maps");
    require_artifact(cfg.artifact("sto2"), "maps");
    require_artifact(cfg.artifact("cluster_labels"), "cluster");
    const ScalarMap dtwi_map = read_scalar_map(cfg.artifact("dtwi"));
    const ScalarMap sto2_map = read_scalar_map(cfg.artifact("sto2"));
    const LabelMap labels = read_label_map(cfg.artifact("cluster_labels"));
    check_hash(dtwi_map.config_hash, cfg, "dtwi map");
    check_hash(sto2_map.config_hash, cfg, "sto2 map");
    check_hash(labels.config_hash, cfg, "cluster labels");

    auto class_means = [&](const ScalarMap& map, const LabelMap& lab) {
        std::vector<double> sums(lab.k, 0.0);
        std::vector<long long> counts(lab.k, 0);
        for (std::size_t p = 0; p < map.n_pixels(); ++p) {
            if (!map.is_tissue(p) || !lab.is_tissue(p)) continue;
            sums[lab.labels[p]] += map.values[p];
            counts[lab.labels[p]] += 1;
        }
        std::vector<double> means(lab.k, 0.0);
        for (int c = 0; c < lab.k; ++c)
            means[c] = counts[c] ? sums[c] / counts[c] : 0.0;
        return means;
    };

    json report;
    report["config_hash"] = cfg.hash();
    if (fs::exists(cfg.artifact("bands.json"))) {
        const json bj = json::parse(read_text(cfg.artifact("bands.json")));
        report["bands_nm"] = bj.at("bands_nm");
        report["band_count"] = bj.at("bands_nm").size();
    }
    report["class_means"] = {{"dtwi", class_means(dtwi_map, labels)},
                             {"sto2", class_means(sto2_map, labels)}};
    if (fs::exists(cfg.artifact("truth_labels") + ".hdr.json")) {
        LabelMap truth = read_label_map(cfg.artifact("truth_labels"));
        truth.mask = labels.mask;
        report["ari_vs_truth"] = adjusted_rand_index(labels, truth);
        report["class_means_truth"] = {{"dtwi", class_means(dtwi_map, truth)},
                                       {"sto2", class_means(sto2_map, truth)}};
    }
    if (fs::exists(cfg.artifact("cluster_report.json")))
        report["cluster"] = json::parse(read_text(cfg.artifact("cluster_report.json")));

    write_text(cfg.artifact("report.json"), report.dump(2));
    write_map_png(dtwi_map, cfg.artifact("dtwi.png"));
    write_map_png(sto2_map, cfg.artifact("sto2.png"));
    write_map_csv(dtwi_map, cfg.artifact("dtwi.csv"));
    write_map_csv(sto2_map, cfg.artifact("sto2.csv"));
    write_label_csv(labels, cfg.artifact("cluster_labels.csv"));
    if (fs::exists(cfg.artifact("k_map") + ".hdr.json")) {
        const ScalarMap k_map = read_scalar_map(cfg.artifact("k_map"));
        const ScalarMap perf = read_scalar_map(cfg.artifact("perfusion"));
        write_map_png(k_map, cfg.artifact("k_map.png"));
        write_map_png(perf, cfg.artifact("perfusion.png"));
        report["lsci_present"] = true;
    }
    write_text(cfg.artifact("report.json"), report.dump(2));
    log << "report: " << cfg.artifact("report.json") << "\n";
}

int run_command(const std::string& command, PipelineConfig& cfg, std::ostream& log) {
    if (command == "phantom")
        cmd_phantom(cfg, log);
    else if (command == "scan")
        cmd_scan(cfg, log);
    else if (command == "calibrate")
        cmd_calibrate(cfg, log);
    else if (command == "preprocess")
        cmd_preprocess(cfg, log);
    else if (command == "maps")
        cmd_maps(cfg, log);
    else if (command == "lsci")
        cmd_lsci(cfg, log);
    else if (command == "train-cae")
        cmd_train_cae(cfg, log);
    else if (command == "cluster")
        cmd_cluster(cfg, log);
    else if (command == "report")
        cmd_report(cfg, log);
    else
        throw ConfigError("unknown command: " + command);
    return 0;
}

} // namespace burnmap
