#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fusenet/hypergraph.hpp"
#include "fusenet/rng.hpp"

using namespace fusenet;

namespace {

Eigen::MatrixXd random_points(int n, int dim, std::uint64_t seed, double scl = 1.0) {
    Rng rng(seed);
    Eigen::MatrixXd m(n, dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = scl * rng.normal();
    return m;
}

// exhaustive k-nearest scan with full sort; tie-break by lower index
std::vector<int> knn_oracle(const Eigen::MatrixXd& x, int center, int kappa) {
    std::vector<std::pair<double, int>> all;
    for (int j = 0; j < x.rows(); ++j) {
        if (j == center) continue;
        all.emplace_back((x.row(center) - x.row(j)).squaredNorm(), j);
    }
    std::sort(all.begin(), all.end());
    std::vector<int> out;
    for (int k = 0; k < kappa; ++k) out.push_back(all[static_cast<std::size_t>(k)].second);
    std::sort(out.begin(), out.end());
    return out;
}

// NMI from a directly built contingency table (independent of the eval module)
double nmi_oracle(const std::vector<int>& a, const std::vector<int>& b) {
    const auto n = static_cast<double>(a.size());
    std::map<int, double> pa, pb;
    std::map<std::pair<int, int>, double> pab;
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[a[i]] += 1.0 / n;
        pb[b[i]] += 1.0 / n;
        pab[{a[i], b[i]}] += 1.0 / n;
    }
    double ha = 0.0, hb = 0.0, mi = 0.0;
    for (auto& [k, p] : pa) ha -= p * std::log(p);
    for (auto& [k, p] : pb) hb -= p * std::log(p);
    for (auto& [k, p] : pab) {
        mi += p * std::log(p / (pa[k.first] * pb[k.second]));
    }
    if (ha == 0.0 && hb == 0.0) return 1.0;
    if (ha == 0.0 || hb == 0.0) return 0.0;
    return mi / std::sqrt(ha * hb);
}

// planted Gaussian mixture, centers far apart relative to the within-std
struct Planted {
    Eigen::MatrixXd x;
    std::vector<int> labels;
};

Planted planted_blobs(int per_cluster, int clusters, int dim, double separation,
                      std::uint64_t seed) {
    Rng rng(seed);
    Planted out;
    out.x.resize(per_cluster * clusters, dim);
    for (int c = 0; c < clusters; ++c) {
        Eigen::VectorXd center(dim);
        for (int j = 0; j < dim; ++j) center(j) = rng.normal();
        center.normalize();
        center *= separation * static_cast<double>(c + 1);
        for (int i = 0; i < per_cluster; ++i) {
            const int row = c * per_cluster + i;
            for (int j = 0; j < dim; ++j) out.x(row, j) = center(j) + rng.normal();
            out.labels.push_back(c);
        }
    }
    return out;
}

} // namespace

TEST_CASE("subsample_training: counts from the published sweep, determinism") {
    LabeledFeatures cand;
    cand.x = Eigen::MatrixXd::Zero(74400, 2);
    cand.labels.assign(74400, 0);
    for (std::size_t i = 0; i < cand.labels.size(); ++i) {
        cand.labels[i] = static_cast<int>(i % 2);
        cand.x(static_cast<int>(i), 0) = static_cast<double>(i);
    }
    CHECK(subsample_training(cand, 10.0, 1).x.rows() == 7440);
    CHECK(subsample_training(cand, 1.0, 1).x.rows() == 744);
    CHECK(subsample_training(cand, 100.0, 1).x.rows() == 74400);

    // labels ride along with their rows
    auto sub = subsample_training(cand, 5.0, 9);
    for (int i = 0; i < sub.x.rows(); ++i) {
        const auto orig = static_cast<std::size_t>(sub.x(i, 0));
        CHECK(sub.labels[static_cast<std::size_t>(i)] == static_cast<int>(orig % 2));
    }
    auto sub2 = subsample_training(cand, 5.0, 9);
    CHECK(sub.x == sub2.x);

    LabeledFeatures tiny;
    tiny.x = Eigen::MatrixXd::Zero(10, 2);
    tiny.labels.assign(10, 0);
    CHECK_THROWS_AS(subsample_training(tiny, 0.1, 1), ContractError);
}

TEST_CASE("knn_hyperedges: pair, collinear triple, brute-force oracle, scaling") {
    { // 2 vertices, kappa=1: both edges contain both vertices
        Eigen::MatrixXd x(2, 2);
        x << 0, 0, 1, 0;
        Hypergraph hg = knn_hyperedges(x, 1);
        CHECK(hg.edges.size() == 2);
        for (const auto& e : hg.edges) CHECK(e == std::vector<int>{0, 1});
        for (int d : hg.edge_degrees()) CHECK(d == 2);
        Eigen::MatrixXd h = hg.incidence();
        CHECK(h.minCoeff() == 1.0);
    }
    { // 3 equally spaced collinear points, kappa=2: every edge has all three
        Eigen::MatrixXd x(3, 1);
        x << 0, 1, 2;
        Hypergraph hg = knn_hyperedges(x, 2);
        for (const auto& e : hg.edges) CHECK(e == std::vector<int>{0, 1, 2});
    }
    { // member sets equal the exhaustive scan on random points
        Eigen::MatrixXd x = random_points(10, 3, 77);
        Hypergraph hg = knn_hyperedges(x, 3);
        for (int i = 0; i < 10; ++i) {
            auto want = knn_oracle(x, i, 3);
            want.push_back(i);
            std::sort(want.begin(), want.end());
            CHECK(hg.edges[static_cast<std::size_t>(i)] == want);
        }
    }
    { // scale covariance: every member set survives feature scaling
        Eigen::MatrixXd x = random_points(12, 4, 5);
        Hypergraph a = knn_hyperedges(x, 4);
        Hypergraph b = knn_hyperedges(3.7 * x, 4);
        for (std::size_t e = 0; e < a.edges.size(); ++e) CHECK(a.edges[e] == b.edges[e]);
    }
    CHECK_THROWS_AS(knn_hyperedges(random_points(3, 2, 1), 3), ContractError);
}

TEST_CASE("hypergraph_laplacian: single-edge case, null space, disconnection") {
    { // one hyperedge over three vertices, weight 1: delta = I - J/3
        Hypergraph hg;
        hg.vertex_count = 3;
        hg.edges = {{0, 1, 2}};
        hg.weights = {1.0};
        Eigen::MatrixXd delta = hypergraph_laplacian(hg);
        Eigen::MatrixXd want = Eigen::MatrixXd::Identity(3, 3) -
                               Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
        CHECK((delta - want).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(delta);
        CHECK(std::abs(es.eigenvalues()(0) - 0.0) < 1e-10);
        CHECK(std::abs(es.eigenvalues()(1) - 1.0) < 1e-10);
        CHECK(std::abs(es.eigenvalues()(2) - 1.0) < 1e-10);
    }
    { // the degree-weighted constant vector is in the null space
        Eigen::MatrixXd x = random_points(14, 3, 21);
        Hypergraph hg = knn_hyperedges(x, 3);
        Eigen::MatrixXd delta = hypergraph_laplacian(hg);
        const auto dv = hg.vertex_degrees();
        Eigen::VectorXd v(14);
        for (int i = 0; i < 14; ++i) v(i) = std::sqrt(dv[static_cast<std::size_t>(i)]);
        CHECK((delta * v).cwiseAbs().maxCoeff() < 1e-10);
    }
    { // two disconnected single-edge components double the zero eigenvalue
        Hypergraph hg;
        hg.vertex_count = 6;
        hg.edges = {{0, 1, 2}, {3, 4, 5}};
        hg.weights = {1.0, 2.0};
        Eigen::MatrixXd delta = hypergraph_laplacian(hg);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(delta);
        CHECK(std::abs(es.eigenvalues()(0)) < 1e-10);
        CHECK(std::abs(es.eigenvalues()(1)) < 1e-10);
        CHECK(es.eigenvalues()(2) > 0.1);
    }
    { // a vertex in no hyperedge is rejected
        Hypergraph hg;
        hg.vertex_count = 3;
        hg.edges = {{0, 1}};
        hg.weights = {1.0};
        CHECK_THROWS_AS(hypergraph_laplacian(hg), ContractError);
    }
}

TEST_CASE("laplacian spectral bounds on random hypergraphs") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Eigen::MatrixXd x = random_points(20, 4, seed);
        Hypergraph hg = knn_hyperedges(x, 2 + static_cast<int>(seed % 4));
        Eigen::MatrixXd delta = hypergraph_laplacian(hg);
        CHECK((delta - delta.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(delta);
        CHECK(es.eigenvalues()(0) >= -1e-10);
        CHECK(es.eigenvalues()(19) <= 2.0 + 1e-10);
    }
}

TEST_CASE("spectral_embed: parallel-to-degree vector, residuals, block recovery") {
    Eigen::MatrixXd x = random_points(12, 3, 3);
    Hypergraph hg = knn_hyperedges(x, 3);
    Eigen::MatrixXd delta = hypergraph_laplacian(hg);
    { // k=1 on a connected hypergraph recovers the sqrt-degree direction
        auto emb = spectral_embed(delta, 1, /*normalize_rows=*/false);
        const auto dv = hg.vertex_degrees();
        Eigen::VectorXd v(12);
        for (int i = 0; i < 12; ++i) v(i) = std::sqrt(dv[static_cast<std::size_t>(i)]);
        v.normalize();
        const double dot = std::abs(v.dot(emb.vectors.col(0)));
        CHECK(dot == doctest::Approx(1.0).epsilon(1e-8));
    }
    { // eigenpair residuals
        auto emb = spectral_embed(delta, 4, /*normalize_rows=*/false);
        for (int c = 0; c < 4; ++c) {
            const double resid =
                (delta * emb.vectors.col(c) - emb.eigenvalues(c) * emb.vectors.col(c)).norm();
            CHECK(resid < 1e-8);
        }
    }
    { // two far blocks: embedding rows constant within a block, k-means splits
        Hypergraph blocks;
        blocks.vertex_count = 8;
        blocks.edges = {{0, 1, 2, 3}, {4, 5, 6, 7}};
        blocks.weights = {1.0, 1.0};
        Eigen::MatrixXd d2 = hypergraph_laplacian(blocks);
        auto emb = spectral_embed(d2, 2);
        for (int i = 1; i < 4; ++i) {
            CHECK((emb.vectors.row(i) - emb.vectors.row(0)).norm() < 1e-8);
            CHECK((emb.vectors.row(4 + i) - emb.vectors.row(4)).norm() < 1e-8);
        }
        auto assign = kmeans(emb.vectors, 2, 5);
        CHECK(assign[0] == assign[1]);
        CHECK(assign[4] == assign[5]);
        CHECK(assign[0] != assign[4]);
    }
    Eigen::MatrixXd asym = Eigen::MatrixXd::Zero(3, 3);
    asym(0, 1) = 1.0;
    CHECK_THROWS_AS(spectral_embed(asym, 1), ContractError);
}

TEST_CASE("connected components equal the zero-eigenvalue multiplicity") {
    Rng rng(44);
    for (int trial = 0; trial < 8; ++trial) {
        const int comps = 1 + static_cast<int>(rng.below(3));
        Hypergraph hg;
        hg.vertex_count = 0;
        for (int c = 0; c < comps; ++c) {
            const int sz = 2 + static_cast<int>(rng.below(3));
            std::vector<int> edge;
            for (int i = 0; i < sz; ++i) edge.push_back(hg.vertex_count + i);
            hg.edges.push_back(edge);
            hg.weights.push_back(0.5 + rng.uniform());
            // a second overlapping edge inside the component keeps it connected
            if (sz > 2) {
                hg.edges.push_back({edge[0], edge[1]});
                hg.weights.push_back(0.5 + rng.uniform());
            }
            hg.vertex_count += sz;
        }
        Eigen::MatrixXd delta = hypergraph_laplacian(hg);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(delta);
        int zeros = 0;
        for (int i = 0; i < es.eigenvalues().size(); ++i) {
            if (std::abs(es.eigenvalues()(i)) < 1e-8) ++zeros;
        }
        CHECK(zeros == comps);
    }
}

TEST_CASE("kmeans: degenerate k=n, planted blobs, determinism, contract") {
    { // every point its own cluster, inertia zero
        Eigen::MatrixXd x = random_points(5, 2, 8);
        auto assign = kmeans(x, 5, 3);
        std::set<int> distinct(assign.begin(), assign.end());
        CHECK(distinct.size() == 5);
    }
    { // two well-separated blobs recovered exactly
        Planted p = planted_blobs(20, 2, 3, 25.0, 5);
        auto assign = kmeans(p.x, 2, 1);
        // consistent within each blob, different across
        for (int i = 1; i < 20; ++i) CHECK(assign[static_cast<std::size_t>(i)] == assign[0]);
        for (int i = 21; i < 40; ++i) CHECK(assign[static_cast<std::size_t>(i)] == assign[20]);
        CHECK(assign[0] != assign[20]);
    }
    {
        Eigen::MatrixXd x = random_points(30, 2, 9);
        CHECK(kmeans(x, 4, 17) == kmeans(x, 4, 17));
    }
    CHECK_THROWS_AS(kmeans(random_points(3, 2, 1), 4, 0), ContractError);
}

TEST_CASE("decode_fold: planted partitions, duplication, 3-class operation") {
    { // far-separated blobs with aligned labels decode to 100% accuracy
        Planted p = planted_blobs(30, 2, 8, 30.0, 11);
        LabeledFeatures train;
        train.x.resize(40, 8);
        std::vector<int> test_truth;
        Eigen::MatrixXd test(20, 8);
        int tr = 0, te = 0;
        for (int i = 0; i < 60; ++i) {
            if (i % 3 == 2) {
                test.row(te++) = p.x.row(i);
                test_truth.push_back(p.labels[static_cast<std::size_t>(i)]);
            } else {
                train.x.row(tr) = p.x.row(i);
                train.labels.push_back(p.labels[static_cast<std::size_t>(i)]);
                ++tr;
            }
        }
        DecodeConfig cfg;
        cfg.kappa = 5;
        cfg.n_classes = 2;
        cfg.seed = 3;
        auto result = decode_fold(train, test, cfg);
        REQUIRE(result.predictions.size() == 20);
        for (std::size_t i = 0; i < 20; ++i) CHECK(result.predictions[i] == test_truth[i]);
    }
    { // test duplicating the training features inherits their labels
        Planted p = planted_blobs(15, 2, 6, 20.0, 13);
        LabeledFeatures train{p.x, p.labels};
        auto result = decode_fold(train, p.x, DecodeConfig{.kappa = 4, .n_classes = 2, .seed = 1});
        for (std::size_t i = 0; i < p.labels.size(); ++i) {
            CHECK(result.predictions[i] == p.labels[i]);
        }
    }
    { // three classes run end to end and emit 3-way predictions
        Planted p = planted_blobs(20, 3, 6, 25.0, 17);
        LabeledFeatures train{p.x, p.labels};
        DecodeConfig cfg;
        cfg.n_classes = 3;
        cfg.seed = 2;
        auto result = decode_fold(train, p.x, cfg);
        std::set<int> seen(result.predictions.begin(), result.predictions.end());
        CHECK(seen.size() == 3);
        int correct = 0;
        for (std::size_t i = 0; i < p.labels.size(); ++i) {
            correct += result.predictions[i] == p.labels[i] ? 1 : 0;
        }
        CHECK(correct == static_cast<int>(p.labels.size()));
    }
    LabeledFeatures empty;
    empty.x = Eigen::MatrixXd::Zero(0, 4);
    CHECK_THROWS_AS(decode_fold(empty, Eigen::MatrixXd::Zero(3, 4), DecodeConfig{}),
                    ContractError);
}

TEST_CASE("planted 3-cluster mixture decodes with NMI >= 0.95 on 10 seeds") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        // 300 points, 64 dims, centers 6x the unit within-cluster std
        Planted p = planted_blobs(100, 3, 64, 6.0, 100 + seed);
        // half train, half test
        LabeledFeatures train;
        train.x.resize(150, 64);
        Eigen::MatrixXd test(150, 64);
        std::vector<int> truth;
        int tr = 0, te = 0;
        for (int i = 0; i < 300; ++i) {
            if (i % 2 == 0) {
                train.x.row(tr) = p.x.row(i);
                train.labels.push_back(p.labels[static_cast<std::size_t>(i)]);
                ++tr;
            } else {
                test.row(te++) = p.x.row(i);
                truth.push_back(p.labels[static_cast<std::size_t>(i)]);
            }
        }
        DecodeConfig cfg;
        cfg.n_classes = 3;
        cfg.kappa = 5;
        cfg.seed = seed;
        auto result = decode_fold(train, test, cfg);
        CHECK(nmi_oracle(result.predictions, truth) >= 0.95);
    }
}

TEST_CASE("matrix/tensor bridge round-trips") {
    Eigen::MatrixXd m = random_points(4, 3, 2);
    Tensor t = matrix_to_tensor(m);
    Eigen::MatrixXd back = tensor_to_matrix(t);
    CHECK((m - back).cwiseAbs().maxCoeff() == 0.0);
}
