#include "fusenet/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "fusenet/dsp.hpp"
#include "fusenet/rng.hpp"

namespace fusenet {

std::string to_string(FeatureFamily f) {
    switch (f) {
        case FeatureFamily::time_domain: return "time";
        case FeatureFamily::band_power: return "psd";
        case FeatureFamily::differential_entropy: return "de";
        case FeatureFamily::eegfusenet: return "fusenet";
    }
    return "time";
}

FeatureFamily parse_feature_family(const std::string& name) {
    if (name == "time") return FeatureFamily::time_domain;
    if (name == "psd") return FeatureFamily::band_power;
    if (name == "de") return FeatureFamily::differential_entropy;
    if (name == "fusenet") return FeatureFamily::eegfusenet;
    throw ConfigError("unknown feature family '" + name +
                      "' (expected fusenet, time, psd or de)");
}

const std::vector<Band>& default_bands() {
    static const std::vector<Band> bands = {
        {"theta", 4.0, 8.0}, {"alpha", 8.0, 13.0}, {"beta", 13.0, 30.0}, {"gamma", 30.0, 45.0}};
    return bands;
}

namespace {

std::vector<double> channel_row(const EegSegment& seg, std::int64_t c) {
    const std::int64_t t = seg.samples.extent(1);
    std::vector<double> row(static_cast<std::size_t>(t));
    for (std::int64_t i = 0; i < t; ++i) row[static_cast<std::size_t>(i)] = seg.samples[c * t + i];
    return row;
}

double vec_mean(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    return m / static_cast<double>(x.size());
}

double vec_var(const std::vector<double>& x) {
    const double m = vec_mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

std::vector<double> diff(const std::vector<double>& x) {
    std::vector<double> d(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
    return d;
}

void check_bands(const std::vector<Band>& bands, double rate) {
    const double nyquist = rate / 2.0;
    for (const auto& b : bands) {
        if (!(b.lo >= 0.0) || !(b.lo < b.hi)) {
            throw ConfigError("band " + b.name + ": edges must satisfy 0 <= lo < hi");
        }
        if (b.hi >= nyquist) {
            throw ConfigError("band " + b.name + ": edge " + std::to_string(b.hi) +
                              " Hz at or above Nyquist " + std::to_string(nyquist));
        }
    }
}

} // namespace

FeatureVector time_domain_features(const EegSegment& seg, double /*rate*/) {
    const std::int64_t c = seg.samples.extent(0), t = seg.samples.extent(1);
    if (t < 3) {
        throw ContractError("time_domain_features: need at least 3 samples, got " +
                            std::to_string(t));
    }
    FeatureVector out;
    out.family = FeatureFamily::time_domain;
    out.subject = seg.subject;
    out.trial = seg.trial;
    out.segment = seg.index;
    out.values.reserve(static_cast<std::size_t>(c * 9));
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const auto row = channel_row(seg, ci);
        const auto d1 = diff(row);
        const auto d2 = diff(d1);
        const double m = vec_mean(row);
        const double var = vec_var(row);
        const double sd = std::sqrt(var);
        double mad1 = 0.0, mad2 = 0.0;
        for (double v : d1) mad1 += std::abs(v);
        mad1 /= static_cast<double>(d1.size());
        for (double v : d2) mad2 += std::abs(v);
        mad2 /= static_cast<double>(d2.size());
        const double var_d1 = vec_var(d1);
        const double var_d2 = vec_var(d2);
        // zero-variance guards: ratio statistics report 0 instead of failing
        const double mobility = var > 0.0 ? std::sqrt(var_d1 / var) : 0.0;
        const double mob_d1 = var_d1 > 0.0 ? std::sqrt(var_d2 / var_d1) : 0.0;
        const double complexity = mobility > 0.0 ? mob_d1 / mobility : 0.0;
        double skew = 0.0, kurt = 0.0;
        if (var > 0.0) {
            double m3 = 0.0, m4 = 0.0;
            for (double v : row) {
                const double z = v - m;
                m3 += z * z * z;
                m4 += z * z * z * z;
            }
            m3 /= static_cast<double>(row.size());
            m4 /= static_cast<double>(row.size());
            skew = m3 / (sd * sd * sd);
            kurt = m4 / (var * var) - 3.0;
        }
        out.values.insert(out.values.end(),
                          {m, sd, mad1, mad2, var, mobility, complexity, skew, kurt});
    }
    return out;
}

FeatureVector band_power_features(const EegSegment& seg, double rate,
                                  const std::vector<Band>& bands) {
    check_bands(bands, rate);
    const std::int64_t c = seg.samples.extent(0);
    FeatureVector out;
    out.family = FeatureFamily::band_power;
    out.subject = seg.subject;
    out.trial = seg.trial;
    out.segment = seg.index;
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const auto spec = dsp::periodogram_hann(channel_row(seg, ci), rate);
        for (const auto& b : bands) out.values.push_back(dsp::band_power(spec, b.lo, b.hi));
    }
    return out;
}

double differential_entropy_of_variance(double variance) {
    const double floored = std::max(variance, 1e-12);
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * floored);
}

FeatureVector differential_entropy_features(const EegSegment& seg, double rate,
                                            const std::vector<Band>& bands) {
    check_bands(bands, rate);
    const std::int64_t c = seg.samples.extent(0);
    FeatureVector out;
    out.family = FeatureFamily::differential_entropy;
    out.subject = seg.subject;
    out.trial = seg.trial;
    out.segment = seg.index;
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const auto row = channel_row(seg, ci);
        for (const auto& b : bands) {
            const double lo = std::max(b.lo, 1e-3);
            const auto sections = dsp::butterworth_bandpass(4, lo, b.hi, rate);
            const auto filtered = dsp::filtfilt(sections, row);
            out.values.push_back(differential_entropy_of_variance(vec_var(filtered)));
        }
    }
    return out;
}

// --- dimensionality mapping -----------------------------------------------------

Eigen::MatrixXd PcaMap::apply(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    Eigen::MatrixXd projected = centered * components;
    if (projected.cols() == out_dim) return projected;
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(x.rows(), out_dim);
    padded.leftCols(projected.cols()) = projected;
    return padded;
}

PcaMap fit_pca(const Eigen::MatrixXd& fit_set, std::int64_t out_dim) {
    if (fit_set.rows() == 0) throw ContractError("fit_pca: empty fit set");
    if (out_dim < 1) throw ContractError("fit_pca: out_dim must be >= 1");
    const auto n = fit_set.rows();
    const auto d = fit_set.cols();
    PcaMap map;
    map.out_dim = out_dim;
    map.mean = fit_set.colwise().mean();
    Eigen::MatrixXd centered = fit_set.rowwise() - map.mean.transpose();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("fit_pca: eigensolver failed");
    const auto kept = std::min<std::int64_t>(out_dim, d);
    map.components.resize(d, kept);
    map.eigenvalues.resize(kept);
    // eigenvalues ascend; take the top `kept` in descending order with a
    // deterministic sign
    for (std::int64_t k = 0; k < kept; ++k) {
        const auto src = d - 1 - k;
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        int arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < v.size(); ++r) {
            if (std::abs(v(r)) > best + 1e-15) {
                best = std::abs(v(r));
                arg = static_cast<int>(r);
            }
        }
        if (v(arg) < 0.0) v = -v;
        map.components.col(k) = v;
        map.eigenvalues(k) = std::max(0.0, solver.eigenvalues()(src));
    }
    return map;
}

Eigen::MatrixXd map_to_dim(const Eigen::MatrixXd& x, std::int64_t out_dim,
                           const Eigen::MatrixXd& fit_set) {
    return fit_pca(fit_set, out_dim).apply(x);
}

// --- comparison decoders -----------------------------------------------------------

std::vector<int> pca_kmeans_baseline(const LabeledFeatures& train, const Eigen::MatrixXd& test,
                                     const DecodeConfig& config) {
    config.validate();
    if (train.x.rows() == 0) throw ContractError("pca_kmeans_baseline: empty training set");
    if (test.rows() == 0) throw ContractError("pca_kmeans_baseline: empty test set");
    PcaMap map = fit_pca(train.x, config.latent);
    Eigen::MatrixXd joint(train.x.rows() + test.rows(), train.x.cols());
    joint.topRows(train.x.rows()) = train.x;
    joint.bottomRows(test.rows()) = test;
    Eigen::MatrixXd projected = map.apply(joint);
    auto clusters = kmeans(projected, config.n_classes, Rng::derive(config.seed, 7));
    auto cluster_class = majority_cluster_classes(clusters, train.labels, config.n_classes);
    std::vector<int> out(static_cast<std::size_t>(test.rows()));
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
        out[static_cast<std::size_t>(i)] =
            cluster_class[static_cast<std::size_t>(clusters[static_cast<std::size_t>(train.x.rows() + i)])];
    }
    return out;
}

Eigen::MatrixXd gaussian_affinity(const Eigen::MatrixXd& x) {
    const auto n = x.rows();
    if (n < 2) throw ContractError("gaussian_affinity: need at least 2 samples");
    double dist_sum = 0.0;
    Eigen::MatrixXd d2(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d2(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = (x.row(i) - x.row(j)).squaredNorm();
            d2(i, j) = d;
            d2(j, i) = d;
            dist_sum += std::sqrt(d);
        }
    }
    double sigma = dist_sum / (static_cast<double>(n) * (n - 1) / 2.0);
    if (!(sigma > 0.0)) sigma = 1.0;
    const double inv = 1.0 / (sigma * sigma);
    Eigen::MatrixXd w(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            w(i, j) = i == j ? 0.0 : std::exp(-d2(i, j) * inv);
        }
    }
    return w;
}

Eigen::MatrixXd simple_graph_laplacian(const Eigen::MatrixXd& affinity) {
    const auto n = affinity.rows();
    if (affinity.cols() != n) throw ContractError("simple_graph_laplacian: matrix not square");
    Eigen::VectorXd deg = affinity.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(deg(i) > 0.0)) {
            throw ContractError("simple_graph_laplacian: zero degree at vertex " +
                                std::to_string(i));
        }
    }
    Eigen::VectorXd inv_sqrt = deg.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n) -
                        inv_sqrt.asDiagonal() * affinity * inv_sqrt.asDiagonal();
    return ((l + l.transpose()) / 2.0).eval();
}

std::vector<int> simple_graph_baseline(const LabeledFeatures& train, const Eigen::MatrixXd& test,
                                       const DecodeConfig& config) {
    config.validate();
    if (train.x.rows() == 0) throw ContractError("simple_graph_baseline: empty training set");
    if (test.rows() == 0) throw ContractError("simple_graph_baseline: empty test set");
    Eigen::MatrixXd joint(train.x.rows() + test.rows(), train.x.cols());
    joint.topRows(train.x.rows()) = train.x;
    joint.bottomRows(test.rows()) = test;
    Eigen::MatrixXd l = simple_graph_laplacian(gaussian_affinity(joint));
    SpectralEmbedding emb = spectral_embed(l, config.n_classes);
    auto clusters = kmeans(emb.vectors, config.n_classes, Rng::derive(config.seed, 7));
    auto cluster_class = majority_cluster_classes(clusters, train.labels, config.n_classes);
    std::vector<int> out(static_cast<std::size_t>(test.rows()));
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
        out[static_cast<std::size_t>(i)] =
            cluster_class[static_cast<std::size_t>(clusters[static_cast<std::size_t>(train.x.rows() + i)])];
    }
    return out;
}

// --- export ------------------------------------------------------------------------

void write_features_csv(std::ostream& out, const std::vector<FeatureVector>& features) {
    if (features.empty()) {
        out << "subject,trial,segment,family\n";
        return;
    }
    out << "subject,trial,segment,family";
    for (std::size_t i = 0; i < features.front().values.size(); ++i) out << ",v" << i;
    out << "\n";
    for (const auto& f : features) {
        out << f.subject << ',' << f.trial << ',' << f.segment << ',' << to_string(f.family);
        for (double v : f.values) out << ',' << v;
        out << "\n";
    }
}

} // namespace fusenet
