#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "burnmap/types.hpp"

namespace burnmap {

/// PCA over mean-centered rows; components ordered by decreasing eigenvalue,
/// sign fixed so each component's largest-magnitude entry is positive.
/// Ratios are eigenvalue / total variance (population covariance).
struct PcaModel {
    int d = 0;
    int p = 0;
    std::vector<double> mean;                      // d
    std::vector<double> components;                // p x d, row-major
    std::vector<double> explained_variance_ratio;  // p
};

PcaModel pca_fit(const std::vector<double>& data, int n, int d, int p = -1);
/// Scores of shape n x p.
std::vector<double> pca_project(const PcaModel& model, const std::vector<double>& data,
                                int n);
/// mean + scores * components, shape n x d.
std::vector<double> pca_reconstruct(const PcaModel& model,
                                    const std::vector<double>& scores, int n);

/// Exact O(n^2) t-SNE (n <= 5000, perplexity < n/3); returns an n x 2
/// embedding, deterministic for a fixed seed.
std::vector<double> tsne_embed(const std::vector<double>& data, int n, int d,
                               double perplexity, int iters, std::uint64_t seed);

struct KmeansResult {
    std::vector<int> labels;
    std::vector<double> centroids;       // k x d
    std::vector<double> objective_trace; // within-cluster sum of squares
    int iterations = 0;
};

/// k-means++ seeding, Lloyd iterations until the largest centroid shift
/// drops below 1e-8 or 300 iterations; empty clusters reseed to the point
/// farthest from its assigned centroid.
KmeansResult kmeans(const std::vector<double>& data, int n, int d, int k,
                    std::uint64_t seed);

struct GmmResult {
    std::vector<double> weights;          // k
    std::vector<double> means;            // k x d
    std::vector<double> covariances;      // k x d x d
    std::vector<double> responsibilities; // n x k
    std::vector<double> loglik_trace;
};

/// EM with full covariances (+1e-6 ridge), k-means initialization, stop at
/// log-likelihood gain < 1e-7 or 200 iterations.
GmmResult gmm_em(const std::vector<double>& data, int n, int d, int k,
                 std::uint64_t seed);

/// A_ij = (1 + cos(x_i, x_j)) / 2, unit diagonal; throws on zero rows.
std::vector<double> cosine_affinity(const std::vector<double>& data, int n, int d);

/// Symmetric normalized Laplacian embedding (k smallest eigenvectors, rows
/// L2-normalized) followed by k-means.
std::vector<int> spectral_cluster(const std::vector<double>& affinity, int n, int k,
                                  std::uint64_t seed);

/// Spectral clustering of a <=max_n seeded subsample of the unmasked pixels;
/// remaining pixels take the label of the nearest cluster mean by cosine
/// distance. Fits in memory for full images despite the O(n^2) affinity.
LabelMap subsample_and_extend(const HyperCube& cube, int max_n, int k,
                              std::uint64_t seed);

/// Majority vote over the (2r+1)^2 neighborhood; ties keep the original.
LabelMap smooth_labels(const LabelMap& labels, int radius);

double adjusted_rand_index(const LabelMap& a, const LabelMap& b);
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

} // namespace burnmap
