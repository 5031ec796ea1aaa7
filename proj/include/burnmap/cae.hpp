#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "burnmap/rng.hpp"
#include "burnmap/types.hpp"

namespace burnmap {

/// Concrete (Gumbel-Softmax) selector layer: k neurons over d input bands.
/// Training weights z_i = softmax((log alpha_i + g_i)/T) per neuron;
/// inference collapses each neuron to the argmax of its logits.
struct ConcreteSelector {
    int k = 5;
    int d = 0;
    std::vector<double> logits; // k*d, row per neuron
    double temperature = 10.0;

    void validate() const;
    const double* row(int neuron) const { return logits.data() + static_cast<std::size_t>(neuron) * d; }
    double* row(int neuron) { return logits.data() + static_cast<std::size_t>(neuron) * d; }
};

/// Per-band normalization captured at training time and replayed at
/// inference (zero-variance bands map to 0).
struct BandNormalizer {
    std::vector<double> mean;
    std::vector<double> std_dev; // 0 marks a degenerate band

    void apply(const double* in, double* out, int d) const;
};

/// Fixed topology from the training recipe: concrete selector (k = 5) ->
/// dense 5 -> reconstruction d, LeakyReLU on both decoder layers.
struct CaeModel {
    static constexpr int kSelected = 5;
    static constexpr int kHidden = 5;

    int d = 0;
    ConcreteSelector selector;
    std::vector<double> w1; // kHidden x kSelected
    std::vector<double> b1; // kHidden
    std::vector<double> w2; // d x kHidden
    std::vector<double> b2; // d
    double leaky_slope = 0.01;
    BandNormalizer norm;
    std::vector<double> wavelengths_nm; // band centers, for band extraction

    std::size_t n_params() const;
    std::string to_json() const;
    static CaeModel from_json(const std::string& text);
};

struct TrainConfig {
    int epochs = 150;
    double learning_rate = 0.001;
    int batch_size = 256;
    double t_start = 10.0;
    double t_end = 0.1;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_mse;
    std::vector<double> val_mse; // inference-mode (one-hot selector) loss
};

/// Bias-corrected Adam over a flat parameter vector.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(std::size_t n_params = 0) : m(n_params, 0.0), v(n_params, 0.0) {}
};

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr);

/// g = -log(-log(u)), u ~ Uniform(0,1], element-wise.
std::vector<double> sample_gumbel(std::size_t n, Rng& rng);
void fill_gumbel(std::span<double> out, Rng& rng);

/// One selector pass over a single example. Training mode needs noise of
/// length k*d; inference ignores it. Returns u (k) and, in training mode,
/// the softmax weights z (k*d).
void concrete_forward(std::span<const double> x, const ConcreteSelector& selector,
                      std::span<const double> noise, bool training,
                      std::span<double> u, std::span<double> z);

/// Batch forward caches for backprop.
struct ForwardCache {
    int batch = 0;
    bool training = false;
    std::vector<double> x;    // batch*d (normalized inputs = targets)
    std::vector<double> z;    // batch*k*d (training only)
    std::vector<double> u;    // batch*k
    std::vector<double> pre1; // batch*kHidden
    std::vector<double> h;    // batch*kHidden
    std::vector<double> pre2; // batch*d
    std::vector<double> yhat; // batch*d
};

/// Forward through selector -> dense(5, LeakyReLU) -> reconstruction(d,
/// LeakyReLU). `x` is already normalized; noise is batch*k*d for training.
void cae_forward(const CaeModel& model, const double* x, int batch,
                 const double* noise, bool training, ForwardCache& cache);

double mse_loss(std::span<const double> pred, std::span<const double> target);

struct CaeGradients {
    std::vector<double> logits, w1, b1, w2, b2;
};

/// Exact analytic gradients of the batch MSE w.r.t. every parameter,
/// including the selector logits through the softmax Jacobian (noise and T
/// held constant).
CaeGradients cae_backward(const CaeModel& model, const ForwardCache& cache);

// Flat packing order: [logits | w1 | b1 | w2 | b2].
std::vector<double> pack_params(const CaeModel& model);
void unpack_params(CaeModel& model, std::span<const double> flat);
std::vector<double> pack_grads(const CaeModel& model, const CaeGradients& g);

/// T(e) = T0 * (T_end/T0)^(e/(epochs-1)); endpoints land exactly on T0 and
/// T_end.
double anneal_temperature(int epoch, const TrainConfig& config);

struct TrainResult {
    CaeModel model;
    TrainHistory history;
};

/// Full training artifact: shapes, logits, weights, config, seed, history.
std::string train_result_to_json(const TrainResult& result, const TrainConfig& config);
TrainResult train_result_from_json(const std::string& text,
                                   TrainConfig* config_out = nullptr);

/// Z-scores the inputs, splits train/validation with a seeded shuffle, and
/// runs minibatch Adam with per-epoch temperature annealing. Gumbel noise is
/// redrawn per neuron per example per presentation.
TrainResult train_cae(const std::vector<double>& pixels, int n, int d,
                      const std::vector<double>& wavelengths_nm,
                      const TrainConfig& config);

/// Inference-mode reconstruction (one-hot selector); input is raw pixels,
/// output lives in the model's normalized space alongside normalize().
std::vector<double> cae_reconstruct(const CaeModel& model, const double* pixels, int n);
std::vector<double> cae_normalize(const CaeModel& model, const double* pixels, int n);

/// Argmax band per selector neuron; a neuron whose argmax is already taken
/// falls back to its highest-logit unused band.
std::vector<int> selected_band_indices(const CaeModel& model);

/// Union of both models' selections mapped to wavelengths, sorted. Grids
/// must be disjoint so the 10 bands are distinct.
std::vector<double> selected_wavelengths(const CaeModel& a, const CaeModel& b);

/// Keep only the grid bands nearest to `bands_nm` (each within one local
/// grid step); mask and spatial dims preserved.
HyperCube downsample_to_bands(const HyperCube& cube, const std::vector<double>& bands_nm);

} // namespace burnmap
