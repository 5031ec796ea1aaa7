#include "burnmap/cae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace burnmap {

using nlohmann::json;
using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;

void ConcreteSelector::validate() const {
    if (k <= 0 || d <= 0 || logits.size() != static_cast<std::size_t>(k) * d)
        throw DataError("concrete selector: bad shape");
    if (!(temperature > 0.0))
        throw DataError("concrete selector: temperature must be > 0");
    for (const double v : logits)
        if (!std::isfinite(v)) throw NumericError("concrete selector: non-finite logit");
}

void BandNormalizer::apply(const double* in, double* out, int d) const {
    for (int b = 0; b < d; ++b)
        out[b] = (std_dev[b] == 0.0) ? 0.0 : (in[b] - mean[b]) / std_dev[b];
}

std::size_t CaeModel::n_params() const {
    return static_cast<std::size_t>(kSelected) * d + kHidden * kSelected + kHidden +
           static_cast<std::size_t>(d) * kHidden + d;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw DataError("train config: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw DataError("train config: lr must be > 0");
    if (batch_size < 1) throw DataError("train config: batch size must be >= 1");
    if (!(t_end > 0.0) || !(t_end < t_start))
        throw DataError("train config: need 0 < T_end < T_start");
    if (!(val_fraction >= 0.05 && val_fraction <= 0.9))
        throw DataError("train config: validation fraction must be in [0.05, 0.9]");
}

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw DataError("adam_step: shape mismatch");
    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(params.size()); ++i) {
        const double g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

std::vector<double> sample_gumbel(std::size_t n, Rng& rng) {
    std::vector<double> g(n);
    fill_gumbel(g, rng);
    return g;
}

void fill_gumbel(std::span<double> out, Rng& rng) {
    // Draw uniforms serially (single stream), transform in parallel.
    for (auto& v : out) v = rng.uniform();
    const long long n = static_cast<long long>(out.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; i += 4096) {
        const long long len = std::min<long long>(4096, n - i);
        ArrayMap chunk(out.data() + i, len);
        chunk = -(-chunk.log()).log();
    }
}

void concrete_forward(std::span<const double> x, const ConcreteSelector& selector,
                      std::span<const double> noise, bool training,
                      std::span<double> u, std::span<double> z) {
    selector.validate();
    const int d = selector.d, k = selector.k;
    if (x.size() != static_cast<std::size_t>(d) || u.size() != static_cast<std::size_t>(k))
        throw DataError("concrete_forward: shape mismatch");
    for (const double v : x)
        if (!std::isfinite(v)) throw NumericError("concrete_forward: non-finite input");

    if (!training) {
        for (int j = 0; j < k; ++j) {
            const double* row = selector.row(j);
            int best = 0;
            for (int i = 1; i < d; ++i)
                if (row[i] > row[best]) best = i;
            u[j] = x[best];
            if (!z.empty()) {
                double* zr = z.data() + static_cast<std::size_t>(j) * d;
                std::fill(zr, zr + d, 0.0);
                zr[best] = 1.0;
            }
        }
        return;
    }

    if (noise.size() != static_cast<std::size_t>(k) * d ||
        z.size() != static_cast<std::size_t>(k) * d)
        throw DataError("concrete_forward: training needs k*d noise and z");
    const double inv_t = 1.0 / selector.temperature;
    for (int j = 0; j < k; ++j) {
        const double* row = selector.row(j);
        const double* g = noise.data() + static_cast<std::size_t>(j) * d;
        double* zr = z.data() + static_cast<std::size_t>(j) * d;
        ConstArrayMap alpha(row, d), gum(g, d);
        ArrayMap zm(zr, d);
        zm = (alpha + gum) * inv_t;
        const double m = zm.maxCoeff();
        zm = (zm - m).exp();
        zm /= zm.sum();
        u[j] = (zm * ConstArrayMap(x.data(), d)).sum();
    }
}

namespace {

inline double lrelu(double v, double slope) { return v >= 0.0 ? v : slope * v; }
inline double lrelu_grad(double v, double slope) { return v >= 0.0 ? 1.0 : slope; }

void decoder_forward(const CaeModel& model, const double* u, double* pre1, double* h,
                     double* pre2, double* yhat) {
    constexpr int K = CaeModel::kSelected;
    constexpr int H = CaeModel::kHidden;
    const int d = model.d;
    for (int a = 0; a < H; ++a) {
        double acc = model.b1[a];
        const double* wrow = model.w1.data() + static_cast<std::size_t>(a) * K;
        for (int j = 0; j < K; ++j) acc += wrow[j] * u[j];
        pre1[a] = acc;
        h[a] = lrelu(acc, model.leaky_slope);
    }
    for (int i = 0; i < d; ++i) {
        double acc = model.b2[i];
        const double* wrow = model.w2.data() + static_cast<std::size_t>(i) * H;
        for (int a = 0; a < H; ++a) acc += wrow[a] * h[a];
        pre2[i] = acc;
        yhat[i] = lrelu(acc, model.leaky_slope);
    }
}

} // namespace

void cae_forward(const CaeModel& model, const double* x, int batch,
                 const double* noise, bool training, ForwardCache& cache) {
    constexpr int K = CaeModel::kSelected;
    constexpr int H = CaeModel::kHidden;
    const int d = model.d;
    if (batch < 1) throw DataError("cae_forward: empty batch");
    if (training && noise == nullptr)
        throw DataError("cae_forward: training needs gumbel noise");

    cache.batch = batch;
    cache.training = training;
    cache.x.assign(x, x + static_cast<std::size_t>(batch) * d);
    cache.u.assign(static_cast<std::size_t>(batch) * K, 0.0);
    cache.pre1.assign(static_cast<std::size_t>(batch) * H, 0.0);
    cache.h.assign(static_cast<std::size_t>(batch) * H, 0.0);
    cache.pre2.assign(static_cast<std::size_t>(batch) * d, 0.0);
    cache.yhat.assign(static_cast<std::size_t>(batch) * d, 0.0);
    if (training)
        cache.z.assign(static_cast<std::size_t>(batch) * K * d, 0.0);
    else
        cache.z.clear();

    // Inference collapses each neuron to one band; find them once.
    std::array<int, CaeModel::kSelected> argmax{};
    if (!training) {
        for (int j = 0; j < K; ++j) {
            const double* row = model.selector.row(j);
            int best = 0;
            for (int i = 1; i < d; ++i)
                if (row[i] > row[best]) best = i;
            argmax[j] = best;
        }
    }

    const double inv_t = 1.0 / model.selector.temperature;
#pragma omp parallel for schedule(static)
    for (long long e = 0; e < batch; ++e) {
        const double* xe = cache.x.data() + e * d;
        double* ue = cache.u.data() + e * K;
        if (training) {
            const double* ge = noise + e * static_cast<long long>(K) * d;
            double* ze = cache.z.data() + e * static_cast<long long>(K) * d;
            for (int j = 0; j < K; ++j) {
                const double* row = model.selector.row(j);
                ConstArrayMap alpha(row, d), gum(ge + static_cast<std::size_t>(j) * d, d);
                ArrayMap zm(ze + static_cast<std::size_t>(j) * d, d);
                zm = (alpha + gum) * inv_t;
                const double m = zm.maxCoeff();
                zm = (zm - m).exp();
                zm /= zm.sum();
                ue[j] = (zm * ConstArrayMap(xe, d)).sum();
            }
        } else {
            for (int j = 0; j < K; ++j) ue[j] = xe[argmax[j]];
        }
        decoder_forward(model, ue, cache.pre1.data() + e * H, cache.h.data() + e * H,
                        cache.pre2.data() + e * d, cache.yhat.data() + e * d);
    }
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw DataError("mse_loss: shape mismatch");
    if (pred.empty()) return 0.0;
    // Blocked accumulation keeps the sum order fixed and well conditioned.
    std::vector<double> block_sums;
    const std::size_t n = pred.size();
    for (std::size_t i = 0; i < n; i += 1024) {
        const std::size_t end = std::min(i + 1024, n);
        double s = 0.0;
        for (std::size_t j = i; j < end; ++j) {
            const double dd = pred[j] - target[j];
            s += dd * dd;
        }
        block_sums.push_back(s);
    }
    return pairwise_sum(block_sums.data(), block_sums.size()) /
           static_cast<double>(n);
}

CaeGradients cae_backward(const CaeModel& model, const ForwardCache& cache) {
    constexpr int K = CaeModel::kSelected;
    constexpr int H = CaeModel::kHidden;
    const int d = model.d;
    const int batch = cache.batch;
    if (!cache.training)
        throw DataError("cae_backward: forward cache was not run in training mode");

    CaeGradients g;
    g.logits.assign(static_cast<std::size_t>(K) * d, 0.0);
    g.w1.assign(static_cast<std::size_t>(H) * K, 0.0);
    g.b1.assign(H, 0.0);
    g.w2.assign(static_cast<std::size_t>(d) * H, 0.0);
    g.b2.assign(d, 0.0);

    const double scale = 2.0 / (static_cast<double>(batch) * d);
    const double inv_t = 1.0 / model.selector.temperature;
    const double slope = model.leaky_slope;

#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
#else
    const int max_threads = 1;
#endif
    std::vector<CaeGradients> partial(max_threads);
    for (auto& pg : partial) {
        pg.logits.assign(g.logits.size(), 0.0);
        pg.w1.assign(g.w1.size(), 0.0);
        pg.b1.assign(g.b1.size(), 0.0);
        pg.w2.assign(g.w2.size(), 0.0);
        pg.b2.assign(g.b2.size(), 0.0);
    }

#pragma omp parallel
    {
#ifdef _OPENMP
        CaeGradients& pg = partial[omp_get_thread_num()];
#else
        CaeGradients& pg = partial[0];
#endif
        std::vector<double> delta2(d), deltah(H), du(K);
#pragma omp for schedule(static)
        for (long long e = 0; e < batch; ++e) {
            const double* xe = cache.x.data() + e * d;
            const double* ye = cache.yhat.data() + e * d;
            const double* p2 = cache.pre2.data() + e * d;
            const double* p1 = cache.pre1.data() + e * H;
            const double* he = cache.h.data() + e * H;
            const double* ue = cache.u.data() + e * K;
            const double* ze = cache.z.data() + e * static_cast<long long>(K) * d;

            for (int i = 0; i < d; ++i)
                delta2[i] = scale * (ye[i] - xe[i]) * lrelu_grad(p2[i], slope);

            // w2 is d x H row-major; accumulate outer product and backprop in
            // one pass.
            std::fill(deltah.begin(), deltah.end(), 0.0);
            for (int i = 0; i < d; ++i) {
                const double d2 = delta2[i];
                const double* wrow = model.w2.data() + static_cast<std::size_t>(i) * H;
                double* grow = pg.w2.data() + static_cast<std::size_t>(i) * H;
                for (int a = 0; a < H; ++a) {
                    grow[a] += d2 * he[a];
                    deltah[a] += wrow[a] * d2;
                }
                pg.b2[i] += d2;
            }
            for (int a = 0; a < H; ++a) deltah[a] *= lrelu_grad(p1[a], slope);

            std::fill(du.begin(), du.end(), 0.0);
            for (int a = 0; a < H; ++a) {
                const double dh = deltah[a];
                const double* wrow = model.w1.data() + static_cast<std::size_t>(a) * K;
                double* grow = pg.w1.data() + static_cast<std::size_t>(a) * K;
                for (int j = 0; j < K; ++j) {
                    grow[j] += dh * ue[j];
                    du[j] += wrow[j] * dh;
                }
                pg.b1[a] += dh;
            }

            // Softmax Jacobian: du_j/dalpha_ji = z_ji * (x_i - u_j) / T.
            for (int j = 0; j < K; ++j) {
                const double duj = du[j] * inv_t;
                const double uj = ue[j];
                const double* zr = ze + static_cast<std::size_t>(j) * d;
                double* lr = pg.logits.data() + static_cast<std::size_t>(j) * d;
                ConstArrayMap zm(zr, d), xm(xe, d);
                ArrayMap lm(lr, d);
                lm += duj * zm * (xm - uj);
            }
        }
    }

    // Merge per-thread partials in thread order.
    for (const auto& pg : partial) {
        for (std::size_t i = 0; i < g.logits.size(); ++i) g.logits[i] += pg.logits[i];
        for (std::size_t i = 0; i < g.w1.size(); ++i) g.w1[i] += pg.w1[i];
        for (std::size_t i = 0; i < g.b1.size(); ++i) g.b1[i] += pg.b1[i];
        for (std::size_t i = 0; i < g.w2.size(); ++i) g.w2[i] += pg.w2[i];
        for (std::size_t i = 0; i < g.b2.size(); ++i) g.b2[i] += pg.b2[i];
    }
    return g;
}

std::vector<double> pack_params(const CaeModel& model) {
    std::vector<double> flat;
    flat.reserve(model.n_params());
    flat.insert(flat.end(), model.selector.logits.begin(), model.selector.logits.end());
    flat.insert(flat.end(), model.w1.begin(), model.w1.end());
    flat.insert(flat.end(), model.b1.begin(), model.b1.end());
    flat.insert(flat.end(), model.w2.begin(), model.w2.end());
    flat.insert(flat.end(), model.b2.begin(), model.b2.end());
    return flat;
}

void unpack_params(CaeModel& model, std::span<const double> flat) {
    if (flat.size() != model.n_params()) throw DataError("unpack_params: size mismatch");
    std::size_t o = 0;
    auto take = [&](std::vector<double>& dst) {
        std::copy(flat.begin() + o, flat.begin() + o + dst.size(), dst.begin());
        o += dst.size();
    };
    take(model.selector.logits);
    take(model.w1);
    take(model.b1);
    take(model.w2);
    take(model.b2);
}

std::vector<double> pack_grads(const CaeModel& model, const CaeGradients& g) {
    std::vector<double> flat;
    flat.reserve(model.n_params());
    flat.insert(flat.end(), g.logits.begin(), g.logits.end());
    flat.insert(flat.end(), g.w1.begin(), g.w1.end());
    flat.insert(flat.end(), g.b1.begin(), g.b1.end());
    flat.insert(flat.end(), g.w2.begin(), g.w2.end());
    flat.insert(flat.end(), g.b2.begin(), g.b2.end());
    return flat;
}

double anneal_temperature(int epoch, const TrainConfig& config) {
    config.validate();
    if (epoch < 0 || epoch > config.epochs)
        throw DataError("anneal_temperature: epoch out of range");
    if (config.epochs == 1) return config.t_start;
    const double frac = static_cast<double>(epoch) / (config.epochs - 1);
    return config.t_start * std::pow(config.t_end / config.t_start, frac);
}

namespace {

CaeModel init_model(int d, const std::vector<double>& wavelengths_nm, Rng& rng) {
    constexpr int K = CaeModel::kSelected;
    constexpr int H = CaeModel::kHidden;
    CaeModel m;
    m.d = d;
    m.selector.k = K;
    m.selector.d = d;
    m.selector.logits.resize(static_cast<std::size_t>(K) * d);
    for (auto& v : m.selector.logits) v = 0.01 * rng.normal();
    const double s1 = std::sqrt(2.0 / K);
    m.w1.resize(static_cast<std::size_t>(H) * K);
    for (auto& v : m.w1) v = s1 * rng.normal();
    m.b1.assign(H, 0.0);
    const double s2 = std::sqrt(2.0 / H);
    m.w2.resize(static_cast<std::size_t>(d) * H);
    for (auto& v : m.w2) v = s2 * rng.normal();
    m.b2.assign(d, 0.0);
    m.wavelengths_nm = wavelengths_nm;
    return m;
}

} // namespace

TrainResult train_cae(const std::vector<double>& pixels, int n, int d,
                      const std::vector<double>& wavelengths_nm,
                      const TrainConfig& config) {
    config.validate();
    if (n < 10) throw DataError("train_cae: need at least 10 pixels");
    if (d < CaeModel::kSelected)
        throw DataError("train_cae: need at least k input bands");
    if (pixels.size() != static_cast<std::size_t>(n) * d)
        throw DataError("train_cae: data size mismatch");
    if (!wavelengths_nm.empty() && wavelengths_nm.size() != static_cast<std::size_t>(d))
        throw DataError("train_cae: wavelength list size mismatch");

    constexpr int K = CaeModel::kSelected;
    Rng rng(config.seed);
    CaeModel model = init_model(d, wavelengths_nm, rng);
    model.selector.temperature = config.t_start;

    // Z-score the inputs; remember the scaling for inference.
    model.norm.mean.assign(d, 0.0);
    model.norm.std_dev.assign(d, 0.0);
#pragma omp parallel
    {
        std::vector<double> col(n);
#pragma omp for schedule(static)
        for (long long b = 0; b < d; ++b) {
            for (int i = 0; i < n; ++i) col[i] = pixels[static_cast<std::size_t>(i) * d + b];
            const MeanStd ms = mean_std({col.data(), static_cast<std::size_t>(n)});
            model.norm.mean[b] = ms.mean;
            model.norm.std_dev[b] =
                (ms.std < 1e-12 * std::max(1.0, std::fabs(ms.mean))) ? 0.0 : ms.std;
        }
    }
    std::vector<double> X(static_cast<std::size_t>(n) * d);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i)
        model.norm.apply(pixels.data() + i * d, X.data() + i * d, d);

    // Seeded shuffle, then split off the validation tail.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
    const int n_val = std::clamp(static_cast<int>(std::lround(config.val_fraction * n)),
                                 1, n - 1);
    const int n_train = n - n_val;
    std::vector<int> train_idx(order.begin(), order.begin() + n_train);
    std::vector<int> val_idx(order.begin() + n_train, order.end());

    AdamState adam(model.n_params());
    std::vector<double> params = pack_params(model);
    TrainResult out;
    out.history.train_mse.reserve(config.epochs);
    out.history.val_mse.reserve(config.epochs);

    ForwardCache cache;
    std::vector<double> batch_x, noise, val_x(static_cast<std::size_t>(n_val) * d);
    for (int i = 0; i < n_val; ++i)
        std::copy_n(X.data() + static_cast<std::size_t>(val_idx[i]) * d, d,
                    val_x.data() + static_cast<std::size_t>(i) * d);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        model.selector.temperature = anneal_temperature(epoch, config);
        for (int i = n_train - 1; i > 0; --i)
            std::swap(train_idx[i],
                      train_idx[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);

        double sse_weighted = 0.0;
        for (int b0 = 0; b0 < n_train; b0 += config.batch_size) {
            const int bs = std::min(config.batch_size, n_train - b0);
            batch_x.resize(static_cast<std::size_t>(bs) * d);
            for (int i = 0; i < bs; ++i)
                std::copy_n(X.data() + static_cast<std::size_t>(train_idx[b0 + i]) * d, d,
                            batch_x.data() + static_cast<std::size_t>(i) * d);
            noise.resize(static_cast<std::size_t>(bs) * K * d);
            fill_gumbel(noise, rng);

            cae_forward(model, batch_x.data(), bs, noise.data(), true, cache);
            const double loss = mse_loss(cache.yhat, cache.x);
            sse_weighted += loss * static_cast<double>(bs) * d;

            const CaeGradients grads = cae_backward(model, cache);
            const std::vector<double> flat_g = pack_grads(model, grads);
            adam_step(adam, params, flat_g, config.learning_rate);
            unpack_params(model, params);
        }
        out.history.train_mse.push_back(sse_weighted /
                                        (static_cast<double>(n_train) * d));

        // Validation in inference mode: one-hot selector, no noise.
        double val_sse = 0.0;
        for (int b0 = 0; b0 < n_val; b0 += config.batch_size) {
            const int bs = std::min(config.batch_size, n_val - b0);
            cae_forward(model, val_x.data() + static_cast<std::size_t>(b0) * d, bs,
                        nullptr, false, cache);
            val_sse += mse_loss(cache.yhat, cache.x) * static_cast<double>(bs) * d;
        }
        out.history.val_mse.push_back(val_sse / (static_cast<double>(n_val) * d));
    }

    out.model = std::move(model);
    return out;
}

std::vector<double> cae_normalize(const CaeModel& model, const double* pixels, int n) {
    std::vector<double> X(static_cast<std::size_t>(n) * model.d);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i)
        model.norm.apply(pixels + i * model.d, X.data() + i * model.d, model.d);
    return X;
}

std::vector<double> cae_reconstruct(const CaeModel& model, const double* pixels, int n) {
    const std::vector<double> X = cae_normalize(model, pixels, n);
    ForwardCache cache;
    cae_forward(model, X.data(), n, nullptr, false, cache);
    return cache.yhat;
}

std::vector<int> selected_band_indices(const CaeModel& model) {
    const int d = model.d, k = model.selector.k;
    if (d < k) throw DataError("selected_band_indices: fewer bands than neurons");
    std::vector<int> chosen;
    std::vector<bool> used(d, false);
    std::vector<int> ranked(d);
    for (int j = 0; j < k; ++j) {
        const double* row = model.selector.row(j);
        std::iota(ranked.begin(), ranked.end(), 0);
        std::sort(ranked.begin(), ranked.end(), [row](int a, int b) {
            if (row[a] != row[b]) return row[a] > row[b];
            return a < b;
        });
        // Duplicates fall back to the runner-up logit.
        for (const int idx : ranked) {
            if (used[idx]) continue;
            used[idx] = true;
            chosen.push_back(idx);
            break;
        }
    }
    if (static_cast<int>(chosen.size()) < k)
        throw DataError("selected_band_indices: fewer than k distinct bands available");
    return chosen;
}

std::vector<double> selected_wavelengths(const CaeModel& a, const CaeModel& b) {
    if (a.wavelengths_nm.empty() || b.wavelengths_nm.empty())
        throw DataError("selected_wavelengths: models lack wavelength grids");
    std::vector<double> out;
    for (const int i : selected_band_indices(a)) out.push_back(a.wavelengths_nm[i]);
    for (const int i : selected_band_indices(b)) out.push_back(b.wavelengths_nm[i]);
    std::sort(out.begin(), out.end());
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i] == out[i - 1])
            throw DataError("selected_wavelengths: model grids overlap on " +
                            std::to_string(out[i]) + " nm");
    return out;
}

HyperCube downsample_to_bands(const HyperCube& cube, const std::vector<double>& bands_nm) {
    if (bands_nm.empty()) throw DataError("downsample_to_bands: empty band list");
    const auto& grid = cube.grid;
    std::vector<std::size_t> idx;
    for (const double lam : bands_nm) {
        const std::size_t j = grid.nearest(lam);
        // Tolerance: one local grid step.
        double step = 0.0;
        if (j > 0) step = std::max(step, grid[j] - grid[j - 1]);
        if (j + 1 < grid.size()) step = std::max(step, grid[j + 1] - grid[j]);
        if (step == 0.0) step = 1.0;
        if (std::fabs(lam - grid[j]) > step + 1e-9)
            throw DataError("downsample_to_bands: " + std::to_string(lam) +
                            " nm is outside the grid tolerance");
        idx.push_back(j);
    }
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (idx[i] == idx[i - 1])
            throw DataError("downsample_to_bands: bands collapse onto one grid index");

    std::vector<double> nm(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) nm[i] = grid[idx[i]];
    HyperCube out(cube.rows, cube.cols, WavelengthGrid(std::move(nm)), cube.quantity);
    out.mask = cube.mask;
    out.provenance = cube.provenance;
    out.provenance.push_back("downsample_to_bands");
    out.config_hash = cube.config_hash;
    const std::size_t np = cube.n_pixels();
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(np); ++p) {
        const double* in = cube.pixel(p);
        double* o = out.pixel(p);
        for (std::size_t i = 0; i < idx.size(); ++i) o[i] = in[idx[i]];
    }
    return out;
}

// ---- serialization -------------------------------------------------------

std::string CaeModel::to_json() const {
    json j;
    j["format"] = "burnmap-cae";
    j["d"] = d;
    j["k"] = selector.k;
    j["hidden"] = kHidden;
    j["leaky_slope"] = leaky_slope;
    j["temperature"] = selector.temperature;
    j["logits"] = selector.logits;
    j["w1"] = w1;
    j["b1"] = b1;
    j["w2"] = w2;
    j["b2"] = b2;
    j["norm_mean"] = norm.mean;
    j["norm_std"] = norm.std_dev;
    j["wavelengths_nm"] = wavelengths_nm;
    return j.dump();
}

std::string train_result_to_json(const TrainResult& result, const TrainConfig& config) {
    json j = json::parse(result.model.to_json());
    j["config"] = {{"epochs", config.epochs},
                   {"learning_rate", config.learning_rate},
                   {"batch_size", config.batch_size},
                   {"t_start", config.t_start},
                   {"t_end", config.t_end},
                   {"val_fraction", config.val_fraction},
                   {"seed", config.seed}};
    j["history"] = {{"train_mse", result.history.train_mse},
                    {"val_mse", result.history.val_mse}};
    return j.dump();
}

TrainResult train_result_from_json(const std::string& text, TrainConfig* config_out) {
    TrainResult r;
    r.model = CaeModel::from_json(text);
    const json j = json::parse(text);
    if (j.contains("history")) {
        r.history.train_mse = j["history"].value("train_mse", std::vector<double>{});
        r.history.val_mse = j["history"].value("val_mse", std::vector<double>{});
    }
    if (config_out && j.contains("config")) {
        const auto& c = j["config"];
        config_out->epochs = c.value("epochs", 150);
        config_out->learning_rate = c.value("learning_rate", 0.001);
        config_out->batch_size = c.value("batch_size", 256);
        config_out->t_start = c.value("t_start", 10.0);
        config_out->t_end = c.value("t_end", 0.1);
        config_out->val_fraction = c.value("val_fraction", 0.2);
        config_out->seed = c.value("seed", std::uint64_t{0});
    }
    return r;
}

CaeModel CaeModel::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad cae model json: ") + e.what());
    }
    if (j.value("format", "") != "burnmap-cae")
        throw ConfigError("not a cae model file");
    CaeModel m;
    m.d = j.at("d").get<int>();
    m.selector.k = j.at("k").get<int>();
    m.selector.d = m.d;
    m.selector.temperature = j.at("temperature").get<double>();
    m.selector.logits = j.at("logits").get<std::vector<double>>();
    m.leaky_slope = j.at("leaky_slope").get<double>();
    m.w1 = j.at("w1").get<std::vector<double>>();
    m.b1 = j.at("b1").get<std::vector<double>>();
    m.w2 = j.at("w2").get<std::vector<double>>();
    m.b2 = j.at("b2").get<std::vector<double>>();
    m.norm.mean = j.at("norm_mean").get<std::vector<double>>();
    m.norm.std_dev = j.at("norm_std").get<std::vector<double>>();
    m.wavelengths_nm = j.at("wavelengths_nm").get<std::vector<double>>();
    m.selector.validate();
    return m;
}

} // namespace burnmap
