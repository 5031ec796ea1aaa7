#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "burnmap/acquisition.hpp"
#include "burnmap/cae.hpp"
#include "burnmap/indices.hpp"
#include "burnmap/savgol.hpp"

namespace burnmap {

/// One reproducibility artifact per experiment: every stage reads its
/// parameters from here, and every output records hash() so mixed-provenance
/// inputs are rejected.
struct PipelineConfig {
    std::string out_dir = "out";
    std::uint64_t seed = 0;

    PhantomSpec phantom;

    // scan
    double spot_mm = 1.0;
    double overlap = 0.0;
    double dwell_s = 0.1;
    double d_ref_mm = 150.0;

    // preprocess
    double crop_lo_nm = 400.0;
    double crop_hi_nm = 2100.0;
    double mask_lo = 0.01;
    double mask_hi = 1.5;
    int smooth_window = 9;
    int smooth_polyorder = 3;
    std::vector<SavgolPlan::Region> smooth_regions; // optional per-region table
    std::string fiducials_csv;

    // physiological maps
    DtwiParams dtwi_params; // s1/s2 defaults calibrated on the reference phantom
    double sto2_lo_nm = 510.0;
    double sto2_hi_nm = 990.0;
    std::string extinction_csv; // empty = builtin table
    int deriv_order = 1;
    int deriv_window = 9;
    int deriv_polyorder = 3;

    // lsci
    std::string lsci_mode = "temporal"; // temporal | spatial
    int lsci_window = 5;
    int lsci_frames = 64;
    double lsci_exposure_s = 0.01;
    double lsci_rate_hz = 100.0;
    std::array<double, kBurnClasses> class_flow = {1.0, 0.7, 0.4, 0.15};

    // cae
    double split_nm = 1100.0;
    TrainConfig cae_vnir;
    TrainConfig cae_swir;

    // cluster
    int cluster_k = 4;
    int cluster_max_n = 4096;
    int cluster_smooth_radius = 1;
    std::string cluster_space = "bands"; // bands | pca | tsne
    double tsne_perplexity = 30.0;
    int tsne_iters = 500;

    static PipelineConfig load(const std::string& path);
    static PipelineConfig from_json_text(const std::string& text);
    std::string to_json() const;
    /// FNV-1a 64 over the canonical JSON dump, as a hex string.
    std::string hash() const;
    void validate() const;

    /// Sub-task seeds derived from the global seed.
    std::uint64_t seed_for(const char* tag) const;
    std::string artifact(const std::string& name) const; // out_dir/name
};

int run_command(const std::string& command, PipelineConfig& config, std::ostream& log);

void cmd_phantom(const PipelineConfig& config, std::ostream& log);
void cmd_scan(const PipelineConfig& config, std::ostream& log);
void cmd_calibrate(const PipelineConfig& config, std::ostream& log);
void cmd_preprocess(const PipelineConfig& config, std::ostream& log);
void cmd_maps(const PipelineConfig& config, std::ostream& log);
void cmd_lsci(const PipelineConfig& config, std::ostream& log);
void cmd_train_cae(const PipelineConfig& config, std::ostream& log);
void cmd_cluster(const PipelineConfig& config, std::ostream& log);
void cmd_report(const PipelineConfig& config, std::ostream& log);

} // namespace burnmap
