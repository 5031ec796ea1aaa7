#include "burnmap/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "burnmap/rng.hpp"

namespace burnmap {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;

} // namespace

// ---- PCA -------------------------------------------------------------------

PcaModel pca_fit(const std::vector<double>& data, int n, int d, int p) {
    if (n < 2) throw DataError("pca_fit: need at least 2 rows");
    if (data.size() != static_cast<std::size_t>(n) * d)
        throw DataError("pca_fit: data size mismatch");
    if (p < 0 || p > d) p = d;

    PcaModel model;
    model.d = d;
    model.p = p;
    model.mean.assign(d, 0.0);

    ConstMatMap X(data.data(), n, d);
    std::vector<double> col(n);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < n; ++i) col[i] = X(i, j);
        model.mean[j] = pairwise_sum(col.data(), n) / n;
    }
    RowMat C = X;
    for (int j = 0; j < d; ++j) C.col(j).array() -= model.mean[j];
    const Eigen::MatrixXd cov = (C.adjoint() * C) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
        throw NumericError("pca_fit: eigendecomposition failed");
    const double total = std::max(cov.trace(), 0.0);

    model.components.assign(static_cast<std::size_t>(p) * d, 0.0);
    model.explained_variance_ratio.assign(p, 0.0);
    for (int c = 0; c < p; ++c) {
        const int src = d - 1 - c; // ascending -> descending
        Eigen::VectorXd v = eig.eigenvectors().col(src);
        // Sign convention: largest-magnitude entry positive.
        int arg = 0;
        for (int j = 1; j < d; ++j)
            if (std::fabs(v(j)) > std::fabs(v(arg))) arg = j;
        if (v(arg) < 0.0) v = -v;
        for (int j = 0; j < d; ++j) model.components[static_cast<std::size_t>(c) * d + j] = v(j);
        const double lam = std::max(eig.eigenvalues()(src), 0.0);
        model.explained_variance_ratio[c] = (total > 0.0) ? lam / total : 0.0;
    }
    return model;
}

std::vector<double> pca_project(const PcaModel& model, const std::vector<double>& data,
                                int n) {
    if (data.size() != static_cast<std::size_t>(n) * model.d)
        throw DataError("pca_project: data size mismatch");
    std::vector<double> scores(static_cast<std::size_t>(n) * model.p, 0.0);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const double* x = data.data() + i * model.d;
        double* s = scores.data() + i * model.p;
        for (int c = 0; c < model.p; ++c) {
            const double* comp = model.components.data() + static_cast<std::size_t>(c) * model.d;
            double acc = 0.0;
            for (int j = 0; j < model.d; ++j) acc += (x[j] - model.mean[j]) * comp[j];
            s[c] = acc;
        }
    }
    return scores;
}

std::vector<double> pca_reconstruct(const PcaModel& model,
                                    const std::vector<double>& scores, int n) {
    if (scores.size() != static_cast<std::size_t>(n) * model.p)
        throw DataError("pca_reconstruct: scores size mismatch");
    std::vector<double> out(static_cast<std::size_t>(n) * model.d);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const double* s = scores.data() + i * model.p;
        double* x = out.data() + i * model.d;
        for (int j = 0; j < model.d; ++j) x[j] = model.mean[j];
        for (int c = 0; c < model.p; ++c) {
            const double* comp = model.components.data() + static_cast<std::size_t>(c) * model.d;
            const double sc = s[c];
            for (int j = 0; j < model.d; ++j) x[j] += sc * comp[j];
        }
    }
    return out;
}

// ---- t-SNE -----------------------------------------------------------------

namespace {

// Row-wise conditional probabilities with the perplexity fixed by a binary
// search over the Gaussian bandwidth.
void tsne_p_matrix(const std::vector<double>& data, int n, int d, double perplexity,
                   std::vector<double>& P) {
    std::vector<double> D2(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const double* xi = data.data() + i * d;
        for (int j = 0; j < n; ++j) {
            const double* xj = data.data() + static_cast<std::size_t>(j) * d;
            double s = 0.0;
            for (int m = 0; m < d; ++m) {
                const double diff = xi[m] - xj[m];
                s += diff * diff;
            }
            D2[i * n + j] = s;
        }
    }

    const double log_perp = std::log(perplexity);
    P.assign(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = -1.0, beta_hi = -1.0;
        double* row = P.data() + i * n;
        const double* drow = D2.data() + i * n;
        for (int iter = 0; iter < 200; ++iter) {
            double sum = 0.0, dsum = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) {
                    row[j] = 0.0;
                    continue;
                }
                const double v = std::exp(-beta * drow[j]);
                row[j] = v;
                sum += v;
                dsum += drow[j] * v;
            }
            if (sum <= 0.0) sum = 1e-300;
            const double entropy = std::log(sum) + beta * dsum / sum;
            const double diff = entropy - log_perp;
            if (std::fabs(diff) < 1e-5) break;
            if (diff > 0.0) {
                beta_lo = beta;
                beta = (beta_hi < 0.0) ? beta * 2.0 : (beta + beta_hi) / 2.0;
            } else {
                beta_hi = beta;
                beta = (beta_lo < 0.0) ? beta / 2.0 : (beta + beta_lo) / 2.0;
            }
        }
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += row[j];
        if (sum <= 0.0) sum = 1e-300;
        for (int j = 0; j < n; ++j) row[j] /= sum;
    }

    // Symmetrize and normalize to sum 1.
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = (P[static_cast<std::size_t>(i) * n + j] +
                              P[static_cast<std::size_t>(j) * n + i]) /
                             (2.0 * n);
            P[static_cast<std::size_t>(i) * n + j] = std::max(v, 1e-12);
            P[static_cast<std::size_t>(j) * n + i] = std::max(v, 1e-12);
        }
    for (int i = 0; i < n; ++i) P[static_cast<std::size_t>(i) * n + i] = 0.0;
}

} // namespace

std::vector<double> tsne_embed(const std::vector<double>& data, int n, int d,
                               double perplexity, int iters, std::uint64_t seed) {
    if (n > 5000) throw DataError("tsne_embed: exact variant limited to n <= 5000");
    if (n < 5) throw DataError("tsne_embed: need at least 5 points");
    if (!(perplexity >= 1.0) || !(perplexity < n / 3.0))
        throw DataError("tsne_embed: perplexity must satisfy 1 <= perp < n/3");
    if (iters < 10) throw DataError("tsne_embed: need at least 10 iterations");
    if (data.size() != static_cast<std::size_t>(n) * d)
        throw DataError("tsne_embed: data size mismatch");

    std::vector<double> P;
    tsne_p_matrix(data, n, d, perplexity, P);

    const int exaggeration_end = std::min(250, iters / 2);
    const int momentum_switch = std::min(250, iters / 2);
    const double eta = 200.0;

    Rng rng(seed);
    std::vector<double> Y(static_cast<std::size_t>(n) * 2);
    for (auto& v : Y) v = 1e-4 * rng.normal();
    std::vector<double> dY(Y.size(), 0.0), gains(Y.size(), 1.0), grad(Y.size(), 0.0);
    std::vector<double> wsum(n, 0.0);

    for (int it = 0; it < iters; ++it) {
        const double exag = (it < exaggeration_end) ? 12.0 : 1.0;

        // Student-t weights and their global sum.
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i) {
            double s = 0.0;
            const double yi0 = Y[i * 2], yi1 = Y[i * 2 + 1];
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d0 = yi0 - Y[static_cast<std::size_t>(j) * 2];
                const double d1 = yi1 - Y[static_cast<std::size_t>(j) * 2 + 1];
                s += 1.0 / (1.0 + d0 * d0 + d1 * d1);
            }
            wsum[i] = s;
        }
        const double Z = std::max(pairwise_sum(wsum.data(), n), 1e-300);

#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i) {
            double g0 = 0.0, g1 = 0.0;
            const double yi0 = Y[i * 2], yi1 = Y[i * 2 + 1];
            const double* prow = P.data() + i * n;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d0 = yi0 - Y[static_cast<std::size_t>(j) * 2];
                const double d1 = yi1 - Y[static_cast<std::size_t>(j) * 2 + 1];
                const double w = 1.0 / (1.0 + d0 * d0 + d1 * d1);
                const double mult = (exag * prow[j] - w / Z) * w;
                g0 += mult * d0;
                g1 += mult * d1;
            }
            grad[i * 2] = 4.0 * g0;
            grad[i * 2 + 1] = 4.0 * g1;
        }

        const double momentum = (it < momentum_switch) ? 0.5 : 0.8;
        for (std::size_t i = 0; i < Y.size(); ++i) {
            // Adaptive per-coordinate gains, as in the reference descent.
            const bool same_sign = (grad[i] > 0.0) == (dY[i] > 0.0);
            gains[i] = same_sign ? std::max(gains[i] * 0.8, 0.01) : gains[i] + 0.2;
            dY[i] = momentum * dY[i] - eta * gains[i] * grad[i];
            Y[i] += dY[i];
        }
        // Recenter.
        double m0 = 0.0, m1 = 0.0;
        for (int i = 0; i < n; ++i) {
            m0 += Y[static_cast<std::size_t>(i) * 2];
            m1 += Y[static_cast<std::size_t>(i) * 2 + 1];
        }
        m0 /= n;
        m1 /= n;
        for (int i = 0; i < n; ++i) {
            Y[static_cast<std::size_t>(i) * 2] -= m0;
            Y[static_cast<std::size_t>(i) * 2 + 1] -= m1;
        }
    }
    return Y;
}

// ---- k-means ---------------------------------------------------------------

namespace {

double sqdist(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int m = 0; m < d; ++m) {
        const double diff = a[m] - b[m];
        s += diff * diff;
    }
    return s;
}

} // namespace

KmeansResult kmeans(const std::vector<double>& data, int n, int d, int k,
                    std::uint64_t seed) {
    if (k < 1) throw DataError("kmeans: k must be >= 1");
    if (n < k) throw DataError("kmeans: need n >= k");
    if (data.size() != static_cast<std::size_t>(n) * d)
        throw DataError("kmeans: data size mismatch");

    Rng rng(seed);
    KmeansResult res;
    res.centroids.assign(static_cast<std::size_t>(k) * d, 0.0);
    res.labels.assign(n, 0);

    // k-means++ seeding.
    std::vector<double> min_d2(n, 0.0);
    {
        const int first = static_cast<int>(rng.uniform_index(n));
        std::copy_n(data.data() + static_cast<std::size_t>(first) * d, d,
                    res.centroids.data());
        for (int i = 0; i < n; ++i)
            min_d2[i] = sqdist(data.data() + static_cast<std::size_t>(i) * d,
                               res.centroids.data(), d);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) total += min_d2[i];
            int pick;
            if (total <= 0.0) {
                pick = static_cast<int>(rng.uniform_index(n));
            } else {
                const double target = rng.uniform() * total;
                double acc = 0.0;
                pick = n - 1;
                for (int i = 0; i < n; ++i) {
                    acc += min_d2[i];
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                }
            }
            double* cen = res.centroids.data() + static_cast<std::size_t>(c) * d;
            std::copy_n(data.data() + static_cast<std::size_t>(pick) * d, d, cen);
            for (int i = 0; i < n; ++i)
                min_d2[i] = std::min(
                    min_d2[i], sqdist(data.data() + static_cast<std::size_t>(i) * d, cen, d));
        }
    }

    std::vector<double> new_centroids(res.centroids.size());
    std::vector<int> counts(k);
    std::vector<double> point_d2(n, 0.0);
    constexpr int kMaxIter = 300;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        // Assign.
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i) {
            const double* x = data.data() + i * d;
            int best = 0;
            double bestd = sqdist(x, res.centroids.data(), d);
            for (int c = 1; c < k; ++c) {
                const double dd =
                    sqdist(x, res.centroids.data() + static_cast<std::size_t>(c) * d, d);
                if (dd < bestd) {
                    bestd = dd;
                    best = c;
                }
            }
            res.labels[i] = best;
            point_d2[i] = bestd;
        }
        res.objective_trace.push_back(pairwise_sum(point_d2.data(), n));
        res.iterations = iter + 1;

        // Update (serial accumulation in point order).
        std::fill(new_centroids.begin(), new_centroids.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            const int c = res.labels[i];
            counts[c] += 1;
            const double* x = data.data() + static_cast<std::size_t>(i) * d;
            double* cen = new_centroids.data() + static_cast<std::size_t>(c) * d;
            for (int m = 0; m < d; ++m) cen[m] += x[m];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Reseed to the point farthest from its assigned centroid.
                int far = 0;
                for (int i = 1; i < n; ++i)
                    if (point_d2[i] > point_d2[far]) far = i;
                std::copy_n(data.data() + static_cast<std::size_t>(far) * d, d,
                            new_centroids.data() + static_cast<std::size_t>(c) * d);
                point_d2[far] = 0.0;
                continue;
            }
            double* cen = new_centroids.data() + static_cast<std::size_t>(c) * d;
            for (int m = 0; m < d; ++m) cen[m] /= counts[c];
        }

        double shift = 0.0;
        for (int c = 0; c < k; ++c)
            shift = std::max(shift,
                             std::sqrt(sqdist(new_centroids.data() + static_cast<std::size_t>(c) * d,
                                              res.centroids.data() + static_cast<std::size_t>(c) * d, d)));
        res.centroids.swap(new_centroids);
        if (shift < 1e-8) break;
    }

    // Final assignment against the final centroids.
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const double* x = data.data() + i * d;
        int best = 0;
        double bestd = sqdist(x, res.centroids.data(), d);
        for (int c = 1; c < k; ++c) {
            const double dd =
                sqdist(x, res.centroids.data() + static_cast<std::size_t>(c) * d, d);
            if (dd < bestd) {
                bestd = dd;
                best = c;
            }
        }
        res.labels[i] = best;
        point_d2[i] = bestd;
    }
    res.objective_trace.push_back(pairwise_sum(point_d2.data(), n));
    return res;
}

// ---- GMM -------------------------------------------------------------------

GmmResult gmm_em(const std::vector<double>& data, int n, int d, int k,
                 std::uint64_t seed) {
    if (k < 1) throw DataError("gmm_em: k must be >= 1");
    if (n < k * (d + 1)) throw DataError("gmm_em: need n >= k*(d+1) points");
    if (data.size() != static_cast<std::size_t>(n) * d)
        throw DataError("gmm_em: data size mismatch");
    constexpr double kRidge = 1e-6;
    constexpr int kMaxIter = 200;
    constexpr double kTol = 1e-7;

    ConstMatMap X(data.data(), n, d);
    GmmResult res;
    res.weights.assign(k, 0.0);
    res.means.assign(static_cast<std::size_t>(k) * d, 0.0);
    res.covariances.assign(static_cast<std::size_t>(k) * d * d, 0.0);
    res.responsibilities.assign(static_cast<std::size_t>(n) * k, 0.0);

    // Initialize from k-means.
    const KmeansResult km = kmeans(data, n, d, k, seed);
    {
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) counts[km.labels[i]] += 1;
        for (int c = 0; c < k; ++c) {
            res.weights[c] = static_cast<double>(std::max(counts[c], 1)) / n;
            std::copy_n(km.centroids.data() + static_cast<std::size_t>(c) * d, d,
                        res.means.data() + static_cast<std::size_t>(c) * d);
        }
        double wsum = 0.0;
        for (const double w : res.weights) wsum += w;
        for (auto& w : res.weights) w /= wsum;
        for (int c = 0; c < k; ++c) {
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
            int cnt = 0;
            for (int i = 0; i < n; ++i) {
                if (km.labels[i] != c) continue;
                Eigen::VectorXd diff =
                    X.row(i).transpose() -
                    Eigen::Map<const Eigen::VectorXd>(
                        res.means.data() + static_cast<std::size_t>(c) * d, d);
                cov += diff * diff.transpose();
                cnt += 1;
            }
            if (cnt < 2) {
                // Degenerate cluster: fall back to the global covariance.
                Eigen::VectorXd gmean = X.colwise().mean();
                cov.setZero();
                for (int i = 0; i < n; ++i) {
                    Eigen::VectorXd diff = X.row(i).transpose() - gmean;
                    cov += diff * diff.transpose();
                }
                cnt = n;
            }
            cov /= static_cast<double>(cnt);
            cov += kRidge * Eigen::MatrixXd::Identity(d, d);
            Eigen::Map<Eigen::MatrixXd>(
                res.covariances.data() + static_cast<std::size_t>(c) * d * d, d, d) = cov;
        }
    }

    std::vector<Eigen::LLT<Eigen::MatrixXd>> chol(k);
    std::vector<double> logdet(k, 0.0), logw(k, 0.0);
    std::vector<double> point_ll(n, 0.0);
    const double log2pi = std::log(2.0 * M_PI);

    for (int iter = 0; iter < kMaxIter; ++iter) {
        for (int c = 0; c < k; ++c) {
            Eigen::Map<const Eigen::MatrixXd> cov(
                res.covariances.data() + static_cast<std::size_t>(c) * d * d, d, d);
            chol[c].compute(cov);
            if (chol[c].info() != Eigen::Success)
                throw NumericError("gmm_em: covariance not positive definite after ridge");
            double ld = 0.0;
            for (int j = 0; j < d; ++j) ld += 2.0 * std::log(chol[c].matrixL()(j, j));
            logdet[c] = ld;
            logw[c] = std::log(std::max(res.weights[c], 1e-300));
        }

        // E-step.
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i) {
            double* resp = res.responsibilities.data() + i * k;
            double maxv = -1e300;
            for (int c = 0; c < k; ++c) {
                Eigen::VectorXd diff =
                    X.row(i).transpose() -
                    Eigen::Map<const Eigen::VectorXd>(
                        res.means.data() + static_cast<std::size_t>(c) * d, d);
                const Eigen::VectorXd sol = chol[c].matrixL().solve(diff);
                const double quad = sol.squaredNorm();
                resp[c] = logw[c] - 0.5 * (d * log2pi + logdet[c] + quad);
                maxv = std::max(maxv, resp[c]);
            }
            double sum = 0.0;
            for (int c = 0; c < k; ++c) sum += std::exp(resp[c] - maxv);
            const double lse = maxv + std::log(sum);
            point_ll[i] = lse;
            for (int c = 0; c < k; ++c) resp[c] = std::exp(resp[c] - lse);
        }
        const double ll = pairwise_sum(point_ll.data(), n);
        res.loglik_trace.push_back(ll);
        if (res.loglik_trace.size() >= 2) {
            const double gain = ll - res.loglik_trace[res.loglik_trace.size() - 2];
            if (gain < kTol && gain > -1e-6) break;
        }

        // M-step (serial accumulation in point order).
        for (int c = 0; c < k; ++c) {
            double nc = 0.0;
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
            for (int i = 0; i < n; ++i) {
                const double r = res.responsibilities[static_cast<std::size_t>(i) * k + c];
                nc += r;
                mu += r * X.row(i).transpose();
            }
            nc = std::max(nc, 1e-300);
            mu /= nc;
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
            for (int i = 0; i < n; ++i) {
                const double r = res.responsibilities[static_cast<std::size_t>(i) * k + c];
                const Eigen::VectorXd diff = X.row(i).transpose() - mu;
                cov += r * (diff * diff.transpose());
            }
            cov /= nc;
            cov += kRidge * Eigen::MatrixXd::Identity(d, d);
            res.weights[c] = nc / n;
            Eigen::Map<Eigen::VectorXd>(res.means.data() + static_cast<std::size_t>(c) * d, d) = mu;
            Eigen::Map<Eigen::MatrixXd>(
                res.covariances.data() + static_cast<std::size_t>(c) * d * d, d, d) = cov;
        }
    }
    return res;
}

// ---- affinity / spectral -----------------------------------------------------

std::vector<double> cosine_affinity(const std::vector<double>& data, int n, int d) {
    if (data.size() != static_cast<std::size_t>(n) * d)
        throw DataError("cosine_affinity: data size mismatch");
    std::vector<double> norms(n);
    for (int i = 0; i < n; ++i) {
        const double* x = data.data() + static_cast<std::size_t>(i) * d;
        double s = 0.0;
        for (int m = 0; m < d; ++m) s += x[m] * x[m];
        if (s < 1e-60)
            throw DataError("cosine_affinity: zero row at index " + std::to_string(i));
        norms[i] = std::sqrt(s);
    }
    std::vector<double> A(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < n; ++i) {
        const double* xi = data.data() + i * d;
        A[i * n + i] = 1.0;
        for (int j = static_cast<int>(i) + 1; j < n; ++j) {
            const double* xj = data.data() + static_cast<std::size_t>(j) * d;
            double dot = 0.0;
            for (int m = 0; m < d; ++m) dot += xi[m] * xj[m];
            const double cosv = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
            const double a = 0.5 * (1.0 + cosv);
            A[i * n + j] = a;
            A[static_cast<std::size_t>(j) * n + i] = a;
        }
    }
    return A;
}

std::vector<int> spectral_cluster(const std::vector<double>& affinity, int n, int k,
                                  std::uint64_t seed) {
    if (affinity.size() != static_cast<std::size_t>(n) * n)
        throw DataError("spectral_cluster: affinity size mismatch");
    if (n < k) throw DataError("spectral_cluster: need n >= k");

    std::vector<double> inv_sqrt_deg(n);
    for (int i = 0; i < n; ++i) {
        const double* row = affinity.data() + static_cast<std::size_t>(i) * n;
        const double deg = pairwise_sum(row, n);
        if (deg < 1e-12)
            throw DataError("spectral_cluster: zero-degree node " + std::to_string(i));
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }

    // L = I - D^{-1/2} A D^{-1/2}
    Eigen::MatrixXd L(n, n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double s = -affinity[i * n + j] * inv_sqrt_deg[i] * inv_sqrt_deg[j];
            L(i, j) = (i == j) ? 1.0 + s : s;
        }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
    if (eig.info() != Eigen::Success)
        throw NumericError("spectral_cluster: eigendecomposition failed");

    // k smallest eigenvectors, rows renormalized.
    std::vector<double> rows(static_cast<std::size_t>(n) * k);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < k; ++c) {
            const double v = eig.eigenvectors()(i, c);
            rows[static_cast<std::size_t>(i) * k + c] = v;
            s += v * v;
        }
        if (s > 0.0) {
            const double inv = 1.0 / std::sqrt(s);
            for (int c = 0; c < k; ++c) rows[static_cast<std::size_t>(i) * k + c] *= inv;
        }
    }
    return kmeans(rows, n, k, k, seed).labels;
}

LabelMap subsample_and_extend(const HyperCube& cube, int max_n, int k,
                              std::uint64_t seed) {
    if (max_n < k) throw DataError("subsample_and_extend: max_n < k");
    const int d = static_cast<int>(cube.bands());
    std::vector<std::size_t> live;
    for (std::size_t p = 0; p < cube.n_pixels(); ++p)
        if (cube.is_tissue(p)) live.push_back(p);
    if (static_cast<int>(live.size()) < k)
        throw DataError("subsample_and_extend: fewer unmasked pixels than clusters");

    // Pick the clustering sample.
    std::vector<std::size_t> sample = live;
    if (static_cast<int>(live.size()) > max_n) {
        Rng rng(seed ^ 0x5bf03635f0a5a1e3ull);
        // Partial Fisher-Yates, then restore pixel order for determinism of
        // the affinity layout.
        for (int i = 0; i < max_n; ++i) {
            const std::size_t j =
                i + rng.uniform_index(static_cast<std::uint64_t>(sample.size() - i));
            std::swap(sample[i], sample[j]);
        }
        sample.resize(max_n);
        std::sort(sample.begin(), sample.end());
    }

    const int m = static_cast<int>(sample.size());
    std::vector<double> spectra(static_cast<std::size_t>(m) * d);
    for (int i = 0; i < m; ++i)
        std::copy_n(cube.pixel(sample[i]), d, spectra.data() + static_cast<std::size_t>(i) * d);

    const auto affinity = cosine_affinity(spectra, m, d);
    const auto labels = spectral_cluster(affinity, m, k, seed);

    LabelMap out(cube.rows, cube.cols, k);
    for (std::size_t p = 0; p < cube.n_pixels(); ++p) out.mask[p] = cube.mask[p];
    for (int i = 0; i < m; ++i) out.labels[sample[i]] = static_cast<std::uint16_t>(labels[i]);

    if (m == static_cast<int>(live.size())) return out;

    // Extend to the rest by nearest cluster mean under cosine distance.
    std::vector<double> means(static_cast<std::size_t>(k) * d, 0.0);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < m; ++i) {
        const int c = labels[i];
        counts[c] += 1;
        const double* x = spectra.data() + static_cast<std::size_t>(i) * d;
        double* mu = means.data() + static_cast<std::size_t>(c) * d;
        for (int j = 0; j < d; ++j) mu[j] += x[j];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        double* mu = means.data() + static_cast<std::size_t>(c) * d;
        for (int j = 0; j < d; ++j) mu[j] /= counts[c];
    }
    std::vector<double> mean_norm(k, 0.0);
    for (int c = 0; c < k; ++c) {
        const double* mu = means.data() + static_cast<std::size_t>(c) * d;
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += mu[j] * mu[j];
        mean_norm[c] = std::sqrt(std::max(s, 1e-300));
    }

    std::vector<std::uint8_t> in_sample(cube.n_pixels(), 0);
    for (const auto p : sample) in_sample[p] = 1;
#pragma omp parallel for schedule(static)
    for (long long li = 0; li < static_cast<long long>(live.size()); ++li) {
        const std::size_t p = live[li];
        if (in_sample[p]) continue;
        const double* x = cube.pixel(p);
        double xnorm = 0.0;
        for (int j = 0; j < d; ++j) xnorm += x[j] * x[j];
        xnorm = std::sqrt(std::max(xnorm, 1e-300));
        int best = 0;
        double best_sim = -2.0;
        for (int c = 0; c < k; ++c) {
            const double* mu = means.data() + static_cast<std::size_t>(c) * d;
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += x[j] * mu[j];
            const double sim = dot / (xnorm * mean_norm[c]);
            if (sim > best_sim) {
                best_sim = sim;
                best = c;
            }
        }
        out.labels[p] = static_cast<std::uint16_t>(best);
    }
    return out;
}

LabelMap smooth_labels(const LabelMap& labels, int radius) {
    if (radius < 1) throw DataError("smooth_labels: radius must be >= 1");
    LabelMap out = labels;
    const int rows = labels.rows, cols = labels.cols;
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(labels.n_pixels()); ++p) {
        if (!labels.is_tissue(p)) continue;
        const int r = static_cast<int>(p) / cols;
        const int c = static_cast<int>(p) % cols;
        std::vector<int> votes(labels.k, 0);
        for (int dr = -radius; dr <= radius; ++dr)
            for (int dc = -radius; dc <= radius; ++dc) {
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                const std::size_t q = static_cast<std::size_t>(rr) * cols + cc;
                if (!labels.is_tissue(q)) continue;
                votes[labels.labels[q]] += 1;
            }
        const int own = labels.labels[p];
        int best = own;
        for (int c2 = 0; c2 < labels.k; ++c2)
            if (votes[c2] > votes[best]) best = c2; // strict: ties keep original
        out.labels[p] = static_cast<std::uint16_t>(best);
    }
    return out;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw DataError("ari: label vectors differ in length");
    const std::size_t n = a.size();
    if (n < 2) throw DataError("ari: need at least 2 elements");
    int ka = 0, kb = 0;
    for (const int v : a) ka = std::max(ka, v + 1);
    for (const int v : b) kb = std::max(kb, v + 1);
    std::vector<long long> table(static_cast<std::size_t>(ka) * kb, 0);
    std::vector<long long> ra(ka, 0), cb(kb, 0);
    for (std::size_t i = 0; i < n; ++i) {
        table[static_cast<std::size_t>(a[i]) * kb + b[i]] += 1;
        ra[a[i]] += 1;
        cb[b[i]] += 1;
    }
    auto comb2 = [](long long v) { return 0.5 * v * (v - 1); };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const long long v : table) sum_ij += comb2(v);
    for (const long long v : ra) sum_a += comb2(v);
    for (const long long v : cb) sum_b += comb2(v);
    const double total = comb2(static_cast<long long>(n));
    const double expected = sum_a * sum_b / total;
    const double maximum = 0.5 * (sum_a + sum_b);
    if (std::fabs(maximum - expected) < 1e-12)
        return 1.0; // both partitions trivial and identical
    return (sum_ij - expected) / (maximum - expected);
}

double adjusted_rand_index(const LabelMap& a, const LabelMap& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw DataError("ari: label map dims differ");
    if (a.mask != b.mask) throw DataError("ari: label map masks differ");
    std::vector<int> va, vb;
    for (std::size_t p = 0; p < a.n_pixels(); ++p) {
        if (!a.is_tissue(p)) continue;
        va.push_back(a.labels[p]);
        vb.push_back(b.labels[p]);
    }
    return adjusted_rand_index(std::span<const int>(va), std::span<const int>(vb));
}

} // namespace burnmap
