#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fusenet/tensor.hpp"

namespace fusenet {

/// Vertex-centric hypergraph: one hyperedge per list entry, positive weights.
struct Hypergraph {
    std::vector<std::vector<int>> edges; // member vertex ids, ascending
    std::vector<double> weights;
    int vertex_count = 0;

    /// d(v) = sum of w(e) over edges containing v.
    std::vector<double> vertex_degrees() const;
    /// delta(e) = |e|.
    std::vector<int> edge_degrees() const;
    Eigen::MatrixXd incidence() const;
    void validate() const;
};

struct DecodeConfig {
    int kappa = 5;
    double eta = 10.0;
    int n_classes = 2;
    int latent = 64;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LabeledFeatures {
    Eigen::MatrixXd x;       // one row per sample
    std::vector<int> labels; // class index per row
};

/// Uniform sample of round(eta/100 * N) candidates without replacement,
/// deterministic per seed; row order of the survivors is preserved.
LabeledFeatures subsample_training(const LabeledFeatures& candidates, double eta,
                                   std::uint64_t seed);

/// One hyperedge per vertex: the vertex plus its kappa nearest neighbours
/// under Euclidean distance (ties broken by lower index). Edge weight is the
/// Gaussian-kernel similarity sum with sigma = mean pairwise distance.
Hypergraph knn_hyperedges(const Eigen::MatrixXd& features, int kappa);

/// Normalized hypergraph Laplacian
///   I - Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}
Eigen::MatrixXd hypergraph_laplacian(const Hypergraph& hg);

struct SpectralEmbedding {
    Eigen::MatrixXd vectors;     // |V| x k
    Eigen::VectorXd eigenvalues; // ascending
};

/// Orthonormal eigenvectors of the k smallest eigenvalues, deterministic sign,
/// rows scaled to unit length when normalize_rows is set.
SpectralEmbedding spectral_embed(const Eigen::MatrixXd& delta, int k,
                                 bool normalize_rows = true);

/// Lloyd iterations from k-means++ seeding, 20 restarts, best inertia kept;
/// empty clusters are repaired by splitting the largest cluster.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed);

struct ClusterResult {
    std::vector<int> cluster_of;    // per joint vertex, train rows first
    std::vector<int> cluster_class; // cluster index -> class
    std::vector<int> predictions;   // per test row
};

/// Transductive decode: joint hypergraph over train+test, bottom eigenspace of
/// its Laplacian, k-means into n_classes clusters, majority-vote cluster ->
/// class mapping from the training labels. Test labels are never seen (the
/// test set carries none).
ClusterResult decode_fold(const LabeledFeatures& train, const Eigen::MatrixXd& test,
                          const DecodeConfig& config);

/// Majority-label map for clusters (ties to the smaller class; clusters with
/// no training vertex fall back to the global majority class).
std::vector<int> majority_cluster_classes(const std::vector<int>& clusters,
                                          const std::vector<int>& train_labels, int n_classes);

/// Bridge to the tensor serialization format for artifact dumps.
Tensor matrix_to_tensor(const Eigen::MatrixXd& m);
Eigen::MatrixXd tensor_to_matrix(const Tensor& t);

} // namespace fusenet
