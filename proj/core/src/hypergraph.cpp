#include "fusenet/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fusenet/errors.hpp"
#include "fusenet/rng.hpp"

namespace fusenet {

std::vector<double> Hypergraph::vertex_degrees() const {
    std::vector<double> d(static_cast<std::size_t>(vertex_count), 0.0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        for (int v : edges[e]) d[static_cast<std::size_t>(v)] += weights[e];
    }
    return d;
}

std::vector<int> Hypergraph::edge_degrees() const {
    std::vector<int> out;
    out.reserve(edges.size());
    for (const auto& e : edges) out.push_back(static_cast<int>(e.size()));
    return out;
}

Eigen::MatrixXd Hypergraph::incidence() const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(vertex_count, static_cast<int>(edges.size()));
    for (std::size_t e = 0; e < edges.size(); ++e) {
        for (int v : edges[e]) h(v, static_cast<int>(e)) = 1.0;
    }
    return h;
}

void Hypergraph::validate() const {
    if (vertex_count < 1) throw ContractError("hypergraph: no vertices");
    if (edges.size() != weights.size()) {
        throw ContractError("hypergraph: edge/weight count mismatch");
    }
    std::vector<bool> covered(static_cast<std::size_t>(vertex_count), false);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (edges[e].empty()) {
            throw ContractError("hypergraph: empty hyperedge " + std::to_string(e));
        }
        if (!(weights[e] > 0.0)) {
            throw ContractError("hypergraph: non-positive weight at edge " + std::to_string(e));
        }
        for (int v : edges[e]) {
            if (v < 0 || v >= vertex_count) {
                throw ContractError("hypergraph: vertex id out of range in edge " +
                                    std::to_string(e));
            }
            covered[static_cast<std::size_t>(v)] = true;
        }
    }
    for (int v = 0; v < vertex_count; ++v) {
        if (!covered[static_cast<std::size_t>(v)]) {
            throw ContractError("hypergraph: vertex " + std::to_string(v) + " is in no hyperedge");
        }
    }
}

void DecodeConfig::validate() const {
    if (kappa < 1) throw ConfigError("decode: kappa must be >= 1");
    if (!(eta > 0.0) || eta > 100.0) throw ConfigError("decode: eta must be in (0,100]");
    if (n_classes < 2) throw ConfigError("decode: n_classes must be >= 2");
    if (latent < 1) throw ConfigError("decode: latent must be >= 1");
}

LabeledFeatures subsample_training(const LabeledFeatures& candidates, double eta,
                                   std::uint64_t seed) {
    const auto n = static_cast<std::int64_t>(candidates.x.rows());
    if (n == 0) throw ContractError("subsample_training: empty candidate set");
    if (candidates.labels.size() != static_cast<std::size_t>(n)) {
        throw ContractError("subsample_training: label/feature count mismatch");
    }
    if (!(eta > 0.0) || eta > 100.0) {
        throw ConfigError("subsample_training: eta must be in (0,100]");
    }
    const auto m = static_cast<std::int64_t>(std::llround(eta / 100.0 * static_cast<double>(n)));
    if (m < 1) {
        throw ContractError("subsample_training: eta " + std::to_string(eta) + "% of " +
                            std::to_string(n) + " candidates selects nothing");
    }
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    // partial Fisher-Yates: the first m entries are a uniform sample
    for (std::int64_t i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    std::vector<std::int64_t> keep(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(keep.begin(), keep.end());
    LabeledFeatures out;
    out.x.resize(m, candidates.x.cols());
    out.labels.resize(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        out.x.row(i) = candidates.x.row(keep[static_cast<std::size_t>(i)]);
        out.labels[static_cast<std::size_t>(i)] =
            candidates.labels[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])];
    }
    return out;
}

Hypergraph knn_hyperedges(const Eigen::MatrixXd& features, int kappa) {
    const auto n = static_cast<int>(features.rows());
    if (kappa < 1) throw ConfigError("knn_hyperedges: kappa must be >= 1");
    if (n < kappa + 1) {
        throw ContractError("knn_hyperedges: need at least kappa+1 = " +
                            std::to_string(kappa + 1) + " vertices, got " + std::to_string(n));
    }
    // one scan: per-vertex kappa nearest plus the global mean pairwise distance
    std::vector<std::vector<std::pair<double, int>>> nearest(static_cast<std::size_t>(n));
    double dist_sum = 0.0;
    std::vector<double> row_d(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d2 = (features.row(i) - features.row(j)).squaredNorm();
            row_d[static_cast<std::size_t>(j)] = d2;
            if (j > i) dist_sum += std::sqrt(d2);
        }
        std::vector<std::pair<double, int>> cand;
        cand.reserve(static_cast<std::size_t>(n - 1));
        for (int j = 0; j < n; ++j) {
            if (j != i) cand.emplace_back(row_d[static_cast<std::size_t>(j)], j);
        }
        std::partial_sort(cand.begin(), cand.begin() + kappa, cand.end());
        nearest[static_cast<std::size_t>(i)].assign(cand.begin(), cand.begin() + kappa);
    }
    const double pairs = static_cast<double>(n) * (n - 1) / 2.0;
    double sigma = dist_sum / pairs;
    if (!(sigma > 0.0)) sigma = 1.0; // all points coincide
    const double inv_s2 = 1.0 / (sigma * sigma);

    Hypergraph hg;
    hg.vertex_count = n;
    hg.edges.resize(static_cast<std::size_t>(n));
    hg.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& edge = hg.edges[static_cast<std::size_t>(i)];
        edge.push_back(i);
        double w = 0.0;
        for (const auto& [d2, j] : nearest[static_cast<std::size_t>(i)]) {
            edge.push_back(j);
            w += std::exp(-d2 * inv_s2);
        }
        std::sort(edge.begin(), edge.end());
        hg.weights[static_cast<std::size_t>(i)] = std::max(w, 1e-12); // keep degrees positive
    }
    hg.validate();
    return hg;
}

Eigen::MatrixXd hypergraph_laplacian(const Hypergraph& hg) {
    hg.validate();
    const int n = hg.vertex_count;
    const auto dv = hg.vertex_degrees();
    for (int v = 0; v < n; ++v) {
        if (!(dv[static_cast<std::size_t>(v)] > 0.0)) {
            throw ContractError("hypergraph_laplacian: zero degree at vertex " +
                                std::to_string(v));
        }
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t e = 0; e < hg.edges.size(); ++e) {
        const auto& edge = hg.edges[e];
        const double scale = hg.weights[e] / static_cast<double>(edge.size());
        for (int u : edge) {
            for (int v : edge) m(u, v) += scale;
        }
    }
    Eigen::VectorXd inv_sqrt(n);
    for (int v = 0; v < n; ++v) inv_sqrt(v) = 1.0 / std::sqrt(dv[static_cast<std::size_t>(v)]);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m(i, j) *= inv_sqrt(i) * inv_sqrt(j);
    }
    Eigen::MatrixXd delta = Eigen::MatrixXd::Identity(n, n) - m;
    // exact symmetry despite accumulation order
    delta = ((delta + delta.transpose()) / 2.0).eval();
    return delta;
}

SpectralEmbedding spectral_embed(const Eigen::MatrixXd& delta, int k, bool normalize_rows) {
    const auto n = static_cast<int>(delta.rows());
    if (delta.cols() != n) throw ContractError("spectral_embed: matrix is not square");
    if (k < 1 || k > n) {
        throw ContractError("spectral_embed: k = " + std::to_string(k) + " outside [1, " +
                            std::to_string(n) + "]");
    }
    const double asym = (delta - delta.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8) {
        throw ContractError("spectral_embed: input asymmetric by " + std::to_string(asym));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(delta);
    if (solver.info() != Eigen::Success) {
        throw NumericError("spectral_embed: eigensolver failed to converge");
    }
    SpectralEmbedding out;
    out.eigenvalues = solver.eigenvalues().head(k);
    out.vectors = solver.eigenvectors().leftCols(k);
    // deterministic sign: largest-magnitude component positive
    for (int c = 0; c < k; ++c) {
        int arg = 0;
        double best = -1.0;
        for (int r = 0; r < n; ++r) {
            const double a = std::abs(out.vectors(r, c));
            if (a > best + 1e-15) {
                best = a;
                arg = r;
            }
        }
        if (out.vectors(arg, c) < 0.0) out.vectors.col(c) = -out.vectors.col(c);
    }
    if (normalize_rows) {
        for (int r = 0; r < n; ++r) {
            const double norm = out.vectors.row(r).norm();
            if (norm > 0.0) out.vectors.row(r) /= norm;
        }
    }
    return out;
}

namespace {

double lloyd_once(const Eigen::MatrixXd& points, int k, Rng& rng, std::vector<int>& assign) {
    const auto n = static_cast<int>(points.rows());
    const auto dim = static_cast<int>(points.cols());
    Eigen::MatrixXd centers(k, dim);

    // k-means++ seeding
    std::vector<double> d2(static_cast<std::size_t>(n),
                           std::numeric_limits<double>::infinity());
    {
        const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        centers.row(0) = points.row(first);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                const double d = (points.row(i) - centers.row(c - 1)).squaredNorm();
                d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], d);
                total += d2[static_cast<std::size_t>(i)];
            }
            int pick = 0;
            if (total > 0.0) {
                double r = rng.uniform() * total;
                for (int i = 0; i < n; ++i) {
                    r -= d2[static_cast<std::size_t>(i)];
                    if (r <= 0.0) {
                        pick = i;
                        break;
                    }
                    pick = i;
                }
            } else {
                pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            }
            centers.row(c) = points.row(pick);
        }
    }

    assign.assign(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = (points.row(i) - centers.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double d = (points.row(i) - centers.row(c)).squaredNorm();
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (assign[static_cast<std::size_t>(i)] != best) {
                assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        // recompute centers; repair empties by splitting the largest cluster
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])]++;
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            int largest = 0;
            for (int c2 = 1; c2 < k; ++c2) {
                if (counts[static_cast<std::size_t>(c2)] > counts[static_cast<std::size_t>(largest)]) largest = c2;
            }
            // farthest member of the largest cluster becomes the empty cluster
            int far = -1;
            double fd = -1.0;
            for (int i = 0; i < n; ++i) {
                if (assign[static_cast<std::size_t>(i)] != largest) continue;
                const double d = (points.row(i) - centers.row(largest)).squaredNorm();
                if (d > fd) {
                    fd = d;
                    far = i;
                }
            }
            if (far >= 0) {
                assign[static_cast<std::size_t>(far)] = c;
                counts[static_cast<std::size_t>(largest)]--;
                counts[static_cast<std::size_t>(c)] = 1;
                changed = true;
            }
        }
        centers.setZero();
        for (int i = 0; i < n; ++i) centers.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
            }
        }
        if (!changed && iter > 0) break;
    }
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        inertia += (points.row(i) - centers.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
    }
    return inertia;
}

} // namespace

std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
    const auto n = static_cast<int>(points.rows());
    if (k < 1) throw ContractError("kmeans: k must be >= 1");
    if (k > n) {
        throw ContractError("kmeans: k = " + std::to_string(k) + " exceeds " +
                            std::to_string(n) + " points");
    }
    constexpr int kRestarts = 20;
    std::vector<int> best_assign;
    double best_inertia = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < kRestarts; ++restart) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(restart)));
        std::vector<int> assign;
        const double inertia = lloyd_once(points, k, rng, assign);
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_assign = std::move(assign);
        }
    }
    return best_assign;
}

std::vector<int> majority_cluster_classes(const std::vector<int>& clusters,
                                          const std::vector<int>& train_labels, int n_classes) {
    const auto n_train = train_labels.size();
    int k = 0;
    for (int c : clusters) k = std::max(k, c + 1);
    std::vector<std::vector<int>> votes(static_cast<std::size_t>(k),
                                        std::vector<int>(static_cast<std::size_t>(n_classes), 0));
    for (std::size_t i = 0; i < n_train; ++i) {
        votes[static_cast<std::size_t>(clusters[i])][static_cast<std::size_t>(train_labels[i])]++;
    }
    std::vector<int> global(static_cast<std::size_t>(n_classes), 0);
    for (int lbl : train_labels) global[static_cast<std::size_t>(lbl)]++;
    const int global_majority = static_cast<int>(
        std::max_element(global.begin(), global.end()) - global.begin());
    std::vector<int> cls(static_cast<std::size_t>(k), global_majority);
    for (int c = 0; c < k; ++c) {
        const auto& v = votes[static_cast<std::size_t>(c)];
        int total = 0;
        for (int count : v) total += count;
        if (total == 0) continue; // no training vertex in this cluster
        cls[static_cast<std::size_t>(c)] =
            static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
    }
    return cls;
}

ClusterResult decode_fold(const LabeledFeatures& train, const Eigen::MatrixXd& test,
                          const DecodeConfig& config) {
    config.validate();
    const auto n_train = static_cast<int>(train.x.rows());
    const auto n_test = static_cast<int>(test.rows());
    if (n_train == 0) throw ContractError("decode_fold: empty training set");
    if (n_test == 0) throw ContractError("decode_fold: empty test set");
    if (train.x.cols() != test.cols()) {
        throw DimensionError("decode_fold: feature widths differ (" +
                             std::to_string(train.x.cols()) + " vs " +
                             std::to_string(test.cols()) + ")");
    }
    if (train.labels.size() != static_cast<std::size_t>(n_train)) {
        throw ContractError("decode_fold: training labels missing");
    }
    for (int lbl : train.labels) {
        if (lbl < 0 || lbl >= config.n_classes) {
            throw ContractError("decode_fold: label " + std::to_string(lbl) +
                                " outside [0, n_classes)");
        }
    }
    Eigen::MatrixXd joint(n_train + n_test, test.cols());
    joint.topRows(n_train) = train.x;
    joint.bottomRows(n_test) = test;

    Hypergraph hg = knn_hyperedges(joint, config.kappa);
    Eigen::MatrixXd delta = hypergraph_laplacian(hg);
    SpectralEmbedding emb = spectral_embed(delta, config.n_classes);
    ClusterResult out;
    out.cluster_of = kmeans(emb.vectors, config.n_classes, Rng::derive(config.seed, 7));
    out.cluster_class = majority_cluster_classes(out.cluster_of, train.labels, config.n_classes);
    out.predictions.resize(static_cast<std::size_t>(n_test));
    for (int i = 0; i < n_test; ++i) {
        const int cluster = out.cluster_of[static_cast<std::size_t>(n_train + i)];
        out.predictions[static_cast<std::size_t>(i)] =
            out.cluster_class[static_cast<std::size_t>(cluster)];
    }
    return out;
}

Tensor matrix_to_tensor(const Eigen::MatrixXd& m) {
    std::vector<double> vals(static_cast<std::size_t>(m.rows() * m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            vals[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
        }
    }
    return Tensor({m.rows(), m.cols()}, std::move(vals));
}

Eigen::MatrixXd tensor_to_matrix(const Tensor& t) {
    if (t.rank() != 2) throw DimensionError("tensor_to_matrix: rank != 2");
    Eigen::MatrixXd m(t.extent(0), t.extent(1));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = t[r * t.extent(1) + c];
        }
    }
    return m;
}

} // namespace fusenet
