#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "fusenet/data.hpp"
#include "fusenet/hypergraph.hpp"

namespace fusenet {

enum class FeatureFamily { time_domain, band_power, differential_entropy, eegfusenet };

std::string to_string(FeatureFamily f);
/// Accepts the CLI spellings: time, psd, de, fusenet.
FeatureFamily parse_feature_family(const std::string& name);

struct FeatureVector {
    FeatureFamily family = FeatureFamily::time_domain;
    std::vector<double> values;
    std::string subject;
    std::string trial;
    std::int64_t segment = -1;
};

struct Band {
    std::string name;
    double lo;
    double hi;
};

/// theta 4-8, alpha 8-13, beta 13-30, gamma 30-45 Hz.
const std::vector<Band>& default_bands();

/// Per channel: mean, std, mean |first diff|, mean |second diff|, activity,
/// mobility, complexity, skewness, excess kurtosis. Zero-variance channels
/// report 0 for the ratio statistics instead of failing.
FeatureVector time_domain_features(const EegSegment& seg, double rate);

/// Hann periodogram power integrated per band and channel.
FeatureVector band_power_features(const EegSegment& seg, double rate,
                                  const std::vector<Band>& bands = default_bands());

/// 0.5*log(2*pi*e*var) of the band-filtered signal per band and channel,
/// variance floored at 1e-12.
FeatureVector differential_entropy_features(const EegSegment& seg, double rate,
                                            const std::vector<Band>& bands = default_bands());

double differential_entropy_of_variance(double variance);

// --- dimensionality mapping -----------------------------------------------------

struct PcaMap {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // raw_dim x kept (orthonormal columns)
    Eigen::VectorXd eigenvalues; // descending, one per kept component
    std::int64_t out_dim = 0;    // kept + zero padding

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// PCA fitted on fit_set rows only; keeps min(out_dim, raw_dim, rows)
/// components and zero-pads the projection up to out_dim when the raw
/// dimensionality is smaller.
PcaMap fit_pca(const Eigen::MatrixXd& fit_set, std::int64_t out_dim);

/// Project rows of x with a PCA fitted on fit_set.
Eigen::MatrixXd map_to_dim(const Eigen::MatrixXd& x, std::int64_t out_dim,
                           const Eigen::MatrixXd& fit_set);

// --- comparison decoders -----------------------------------------------------------

/// PCA to the configured latent size, k-means over train+test, majority-label
/// cluster mapping; predictions for the test rows.
std::vector<int> pca_kmeans_baseline(const LabeledFeatures& train, const Eigen::MatrixXd& test,
                                     const DecodeConfig& config);

/// Pairwise Gaussian-affinity graph, normalized graph Laplacian, then the same
/// embed/partition/map path as the hypergraph decoder.
std::vector<int> simple_graph_baseline(const LabeledFeatures& train, const Eigen::MatrixXd& test,
                                       const DecodeConfig& config);

/// exp(-d^2/sigma^2) affinities with sigma = mean pairwise distance; zero
/// diagonal.
Eigen::MatrixXd gaussian_affinity(const Eigen::MatrixXd& x);

/// I - D^{-1/2} W D^{-1/2}.
Eigen::MatrixXd simple_graph_laplacian(const Eigen::MatrixXd& affinity);

// --- export ------------------------------------------------------------------------

/// CSV with identity columns then values: subject,trial,segment,family,v0,...
void write_features_csv(std::ostream& out, const std::vector<FeatureVector>& features);

} // namespace fusenet
