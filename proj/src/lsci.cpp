#include "burnmap/lsci.hpp"

#include <cmath>

#include "burnmap/rng.hpp"

namespace burnmap {

FrameStack::FrameStack(int frames_, int rows_, int cols_, double exposure_s_,
                       double rate_hz_)
    : frames(frames_), rows(rows_), cols(cols_), exposure_s(exposure_s_),
      rate_hz(rate_hz_) {
    if (frames < 2) throw DataError("frame stack needs N >= 2 frames");
    if (rows <= 0 || cols <= 0) throw DataError("frame stack dims must be positive");
    if (!(exposure_s > 0.0) || !(rate_hz > 0.0))
        throw DataError("frame stack exposure/rate must be positive");
    data.assign(static_cast<std::size_t>(frames) * frame_size(), 0.0);
}

void FrameStack::validate() const {
    if (frames < 2) throw DataError("frame stack needs N >= 2 frames");
    if (data.size() != static_cast<std::size_t>(frames) * frame_size())
        throw DataError("frame stack data size mismatch");
    for (const double v : data)
        if (!std::isfinite(v) || v < 0.0)
            throw DataError("frame stack values must be finite and non-negative");
}

ScalarMap temporal_contrast(const FrameStack& stack) {
    if (stack.frames < 2) throw DataError("temporal_contrast needs N >= 2 frames");
    ScalarMap out(stack.rows, stack.cols, "speckle_contrast", "ratio");
    const std::size_t fs = stack.frame_size();
    const int n = stack.frames;
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(fs); ++p) {
        double mean = 0.0;
        for (int f = 0; f < n; ++f) mean += stack.data[static_cast<std::size_t>(f) * fs + p];
        mean /= n;
        if (mean < 1e-9) {
            out.set_masked(p);
            continue;
        }
        double var = 0.0;
        for (int f = 0; f < n; ++f) {
            const double d = stack.data[static_cast<std::size_t>(f) * fs + p] - mean;
            var += d * d;
        }
        var /= n; // population sigma
        out.set(p, std::sqrt(var) / mean);
    }
    return out;
}

ScalarMap spatial_contrast(const FrameStack& stack, int window) {
    if (window < 3 || window % 2 == 0)
        throw DataError("spatial_contrast: window must be odd and >= 3");
    if (window > stack.rows || window > stack.cols)
        throw DataError("spatial_contrast: window larger than image");

    const int h = window / 2;
    const std::size_t fs = stack.frame_size();
    const int rows = stack.rows, cols = stack.cols;

    // Per-frame integral images of I and I^2; window stats in O(1) per pixel.
    std::vector<double> acc(fs, 0.0);
    std::vector<std::uint8_t> dead(fs, 0);
    std::vector<double> s1(static_cast<std::size_t>(rows + 1) * (cols + 1));
    std::vector<double> s2(static_cast<std::size_t>(rows + 1) * (cols + 1));
    const std::size_t stride = cols + 1;

    for (int f = 0; f < stack.frames; ++f) {
        const double* img = stack.data.data() + static_cast<std::size_t>(f) * fs;
        for (int r = 0; r < rows; ++r) {
            double row1 = 0.0, row2 = 0.0;
            for (int c = 0; c < cols; ++c) {
                const double v = img[static_cast<std::size_t>(r) * cols + c];
                row1 += v;
                row2 += v * v;
                s1[(r + 1) * stride + c + 1] = s1[r * stride + c + 1] + row1;
                s2[(r + 1) * stride + c + 1] = s2[r * stride + c + 1] + row2;
            }
        }
#pragma omp parallel for schedule(static)
        for (long long p = 0; p < static_cast<long long>(fs); ++p) {
            const int r = static_cast<int>(p) / cols;
            const int c = static_cast<int>(p) % cols;
            const int r0 = std::max(0, r - h), r1 = std::min(rows - 1, r + h);
            const int c0 = std::max(0, c - h), c1 = std::min(cols - 1, c + h);
            const double cnt = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
            auto box = [&](const std::vector<double>& s) {
                return s[(r1 + 1) * stride + c1 + 1] - s[r0 * stride + c1 + 1] -
                       s[(r1 + 1) * stride + c0] + s[r0 * stride + c0];
            };
            const double mean = box(s1) / cnt;
            if (mean < 1e-9) {
                dead[p] = 1;
                continue;
            }
            const double var = std::max(box(s2) / cnt - mean * mean, 0.0);
            acc[p] += std::sqrt(var) / mean;
        }
    }

    ScalarMap out(stack.rows, stack.cols, "speckle_contrast", "ratio");
    for (std::size_t p = 0; p < fs; ++p) {
        if (dead[p])
            out.set_masked(p);
        else
            out.set(p, acc[p] / stack.frames);
    }
    return out;
}

ScalarMap perfusion_index(const ScalarMap& contrast) {
    ScalarMap out(contrast.rows, contrast.cols, "perfusion_index", "arb");
    out.config_hash = contrast.config_hash;
    for (std::size_t p = 0; p < contrast.n_pixels(); ++p) {
        if (!contrast.is_tissue(p)) {
            out.set_masked(p);
            continue;
        }
        const double k = contrast.values[p];
        if (k < 0.0) throw DataError("perfusion_index: negative contrast");
        const double kk = std::max(k, kContrastFloor);
        out.set(p, 1.0 / (kk * kk));
    }
    return out;
}

FrameStack simulate_speckle(const FlowMap& flow, int n_frames, std::uint64_t seed,
                            double exposure_s, double rate_hz) {
    if (n_frames < 2) throw DataError("simulate_speckle needs N >= 2 frames");
    for (const double v : flow.flow)
        if (!(v >= 0.0)) throw DataError("simulate_speckle: flow must be >= 0");

    FrameStack stack(n_frames, flow.rows, flow.cols, exposure_s, rate_hz);

    // Ornstein-Uhlenbeck driver x with decorrelation rate kDecorrPerFlow*flow,
    // integrated over each exposure in kSubsteps increments. Static speckle
    // (flow = 0) keeps x frozen at its initial draw.
    constexpr double kDecorrPerFlow = 200.0; // 1/s per flow unit
    constexpr double kSigmaRel = 0.4;
    constexpr double kMeanIntensity = 1000.0;
    constexpr int kSubsteps = 32;

    const std::size_t fs = stack.frame_size();
    const double dt = exposure_s / kSubsteps;
    // Frames are contiguous when exposure fills the frame interval; any gap
    // is burned through with the same process.
    const double gap_s = std::max(1.0 / rate_hz - exposure_s, 0.0);
    const int gap_steps = static_cast<int>(std::lround(gap_s / dt));

#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(fs); ++p) {
        Rng rng(seed ^ (static_cast<std::uint64_t>(p) * 0x9e3779b97f4a7c15ull) ^
                0x1f83d9abfb41bd6bull);
        const double rate = kDecorrPerFlow * flow.flow[p];
        const double rho = std::exp(-rate * dt);
        const double drive = std::sqrt(std::max(1.0 - rho * rho, 0.0));
        double x = rng.normal();
        for (int f = 0; f < n_frames; ++f) {
            double acc = 0.0;
            for (int m = 0; m < kSubsteps; ++m) {
                if (drive > 0.0) x = rho * x + drive * rng.normal();
                acc += x;
            }
            const double intensity =
                kMeanIntensity * (1.0 + kSigmaRel * acc / kSubsteps);
            stack.data[static_cast<std::size_t>(f) * fs + p] = std::max(intensity, 0.0);
            for (int m = 0; m < gap_steps; ++m)
                if (drive > 0.0) x = rho * x + drive * rng.normal();
        }
    }
    return stack;
}

} // namespace burnmap
