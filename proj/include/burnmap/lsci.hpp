#pragma once

#include <cstdint>
#include <vector>

#include "burnmap/types.hpp"

namespace burnmap {

/// frames x rows x cols speckle intensity stack, frame-major.
struct FrameStack {
    int frames = 0;
    int rows = 0;
    int cols = 0;
    double exposure_s = 0.01;
    double rate_hz = 100.0;
    std::vector<double> data; // frames*rows*cols

    FrameStack() = default;
    FrameStack(int frames_, int rows_, int cols_, double exposure_s_, double rate_hz_);

    std::size_t frame_size() const { return static_cast<std::size_t>(rows) * cols; }
    double& at(int f, int r, int c) {
        return data[static_cast<std::size_t>(f) * frame_size() + static_cast<std::size_t>(r) * cols + c];
    }
    double at(int f, int r, int c) const {
        return data[static_cast<std::size_t>(f) * frame_size() + static_cast<std::size_t>(r) * cols + c];
    }
    void validate() const; // N >= 2, finite non-negative values
};

/// Relative flow velocities (arbitrary units >= 0); simulator ground truth.
struct FlowMap {
    int rows = 0;
    int cols = 0;
    std::vector<double> flow;

    FlowMap() = default;
    FlowMap(int rows_, int cols_) : rows(rows_), cols(cols_) {
        flow.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    }
};

/// Temporal contrast K_t = sigma_t / <I_t> per pixel (population sigma over
/// frames). Pixels with mean below 1e-9 are masked.
ScalarMap temporal_contrast(const FrameStack& stack);

/// Per-frame sliding-window K_s = sigma_w / mu_w (window odd, >= 3; edge
/// pixels use windows clipped to the image), averaged over frames.
ScalarMap spatial_contrast(const FrameStack& stack, int window);

/// PI = 1/K^2, saturated at K_floor = 1e-3; masked pixels propagate.
ScalarMap perfusion_index(const ScalarMap& contrast);

constexpr double kContrastFloor = 1e-3;

/// Seeded speckle simulator: per pixel an Ornstein-Uhlenbeck style
/// multiplicative intensity process integrated over each exposure. The
/// temporal decorrelation rate grows linearly with the flow value, so faster
/// flow washes out intra-exposure fluctuations and lowers K_t. Zero flow
/// freezes the static speckle pattern.
FrameStack simulate_speckle(const FlowMap& flow, int n_frames, std::uint64_t seed,
                            double exposure_s = 0.01, double rate_hz = 100.0);

} // namespace burnmap
