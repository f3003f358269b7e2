#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fusenet/data.hpp"
#include "fusenet/features.hpp"
#include "fusenet/hypergraph.hpp"
#include "fusenet/trainer.hpp"

namespace fusenet {

// --- fold planning -----------------------------------------------------------------

struct FoldPlan {
    std::string held_out;
    std::vector<std::string> candidates;
    std::uint64_t seed = 0;
};

/// One fold per subject, ordered by subject id. Needs >= 2 subjects.
std::vector<FoldPlan> loocv_folds(const DatasetManifest& manifest, std::uint64_t seed = 0);

/// Hard trap: no candidate or training segment may come from the held-out
/// subject. Throws DivergenceError (the leakage trap) on violation.
void assert_no_leakage(const FoldPlan& plan, const std::vector<EegSegment>& candidates,
                       const std::vector<EegSegment>& test);

// --- metrics -----------------------------------------------------------------------

/// Percent agreement.
double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);
/// Percent F1 of the designated positive class; 0 when precision+recall is 0.
double f1_score(const std::vector<int>& pred, const std::vector<int>& truth, int positive_class);
/// Unweighted mean of per-class F1 over classes 0..n_classes-1, in percent.
double f1_macro(const std::vector<int>& pred, const std::vector<int>& truth, int n_classes);
/// I(a;b) / sqrt(H(a) H(b)) from the contingency table, natural logs. 1 when
/// both labelings are constant, 0 when exactly one is.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

// --- experiment driver ---------------------------------------------------------------

enum class DecoderKind { hypergraph, simple_graph, pca_kmeans };
std::string to_string(DecoderKind d);
DecoderKind parse_decoder(const std::string& name);

struct EvalConfig {
    FeatureFamily features = FeatureFamily::eegfusenet;
    DecoderKind decoder = DecoderKind::hypergraph;
    TrainConfig train;   // used when features == eegfusenet
    DecodeConfig decode; // kappa/eta/latent/n_classes come from here
    bool vote_per_trial = false;
    bool macro_f1 = false;
    int jobs = 1;
    std::int64_t segment_samples = 0; // 0 = manifest segmentation
    std::uint64_t seed = 0;
};

struct FoldRow {
    std::string subject;
    std::string dimension;
    double p_acc = 0.0;
    double p_f = 0.0;
    double nmi_value = 0.0;
    double train_seconds = 0.0;
    double extract_seconds = 0.0;
    double decode_seconds = 0.0;
    bool failed = false;
    std::string error;
};

struct EvalReport {
    std::string features;
    std::string decoder;
    int kappa = 5;
    double eta = 10.0;
    std::int64_t latent = 64;
    std::uint64_t seed = 0;
    std::vector<FoldRow> rows;
    std::map<std::string, double> mean_p_acc;
    std::map<std::string, double> mean_p_f;
    std::map<std::string, double> mean_nmi;
    double train_seconds = 0.0;
    double extract_seconds = 0.0;
    double decode_seconds = 0.0;

    /// Recompute aggregates from the rows (failed rows excluded).
    void finalize();
};

/// Full leave-one-subject-out run: per fold, fit the feature source on the
/// training subjects only, extract features for everyone, subsample training
/// candidates at eta %, decode per emotion dimension, score. Folds run in
/// parallel up to `jobs`; results are deterministic per seed either way.
EvalReport run_experiment(const Dataset& ds, const EvalConfig& config);

// --- sweeps ------------------------------------------------------------------------

struct SweepPoint {
    std::string param;
    double value = 0.0;
    EvalReport report;
};

std::vector<SweepPoint> sweep_kappa(const Dataset& ds, const EvalConfig& base,
                                    const std::vector<int>& kappas);
std::vector<SweepPoint> sweep_eta(const Dataset& ds, const EvalConfig& base,
                                  const std::vector<double>& etas);
std::vector<SweepPoint> sweep_input_size(const Dataset& ds, const EvalConfig& base,
                                         const std::vector<std::int64_t>& sizes);

/// CSV: param,value,train_seconds,extract_seconds,decode_seconds,overall_seconds
void write_sweep_timing_csv(std::ostream& out, const std::vector<SweepPoint>& points);

// --- report I/O ----------------------------------------------------------------------

void write_report_csv(std::ostream& out, const EvalReport& report);
EvalReport parse_report_csv(std::istream& in);
void write_report_json(std::ostream& out, const EvalReport& report);
EvalReport parse_report_json(std::istream& in);

/// Rows = labelled runs (e.g. the four network configurations), columns =
/// mean P_acc / P_f / NMI per emotion dimension.
void write_comparison_table(std::ostream& out,
                            const std::vector<std::pair<std::string, EvalReport>>& runs);

} // namespace fusenet
