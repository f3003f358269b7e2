#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fusenet/tensor.hpp"

namespace fusenet {

/// One fixed-length window cut from a trial.
struct EegSegment {
    std::string subject;
    std::string trial;
    std::int64_t index = 0;
    Tensor samples; // [C,T]
};

/// Raw per-dimension annotation: the original score plus the class index
/// actually used for evaluation.
struct LabelValue {
    double score = 0.0;
    int cls = 0;
};

struct TrialInfo {
    std::string id;
    std::int64_t segments = 0;
    std::int64_t total_samples = 0;
    std::string blob; // path relative to the store root
    std::map<std::string, LabelValue> labels;
};

struct SubjectInfo {
    std::string id;
    std::vector<TrialInfo> trials;
};

struct DatasetManifest {
    std::string dataset;
    double sampling_rate = 0.0;
    std::int64_t channels = 0;
    double segment_seconds = 1.0;
    std::vector<std::string> dimensions;
    std::map<std::string, int> n_classes;
    std::vector<SubjectInfo> subjects;
    std::string root; // set when loaded from disk

    std::int64_t segment_samples() const;
    std::int64_t total_segments() const;
    /// Structural checks (unique subjects, nonempty trials, label coverage).
    void validate() const;
};

/// A store held in memory: the manifest plus one [C,samples] tensor per trial,
/// indexed as trials[subject][trial] in manifest order.
struct Dataset {
    DatasetManifest manifest;
    std::vector<std::vector<Tensor>> trials;

    /// Cut non-overlapping windows from every trial. samples_per_segment = 0
    /// uses the manifest segmentation; a positive override re-windows (the
    /// trailing remainder is dropped).
    std::vector<EegSegment> cut_segments(std::int64_t samples_per_segment = 0) const;
};

// --- store I/O -------------------------------------------------------------------
// manifest.json + one tensor blob per trial ([C,samples], 32-bit floats).

DatasetManifest load_manifest(const std::string& dir);
Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& ds, const std::string& dir);

// --- preprocessing ----------------------------------------------------------------

struct PreprocConfig {
    bool common_average = true;
    bool bandpass = true;
    double band_low = 4.0;
    double band_high = 45.0;
    bool notch = false;
    double notch_low = 49.0;
    double notch_high = 51.0;
    double target_rate = 0.0; // 0 keeps the input rate
    double segment_seconds = 1.0;

    void validate(double input_rate) const;
};

struct PreprocResult {
    Tensor samples; // [C,N']
    double rate;
};

/// Common-average re-reference, zero-phase band-pass, then resampling.
PreprocResult preprocess_trial(const Tensor& trial, double rate, const PreprocConfig& config);

/// Apply preprocess_trial to a whole dataset.
Dataset preprocess_dataset(const Dataset& ds, const PreprocConfig& config);

// --- segmentation / labels ----------------------------------------------------------

/// Consecutive non-overlapping windows of rate*seconds samples; the trailing
/// remainder is dropped. Throws if the trial is shorter than one window.
std::vector<EegSegment> segment_trial(const Tensor& trial, double rate, double seconds,
                                      const std::string& subject, const std::string& trial_id);

/// Score in [1,9] against a fixed threshold; strictly-greater maps to high.
/// Returns 1 for high, 0 for low.
int binarize_label(double score, double threshold = 5.0);

// --- synthetic corpus ---------------------------------------------------------------

/// Class k plants a sinusoid at 6*(k+1) Hz with a class-specific spatial
/// mixing pattern on top of AR(1) noise, so planted classes are separable in
/// band-power space by construction.
struct SynthSpec {
    std::int64_t subjects = 6;
    std::int64_t trials = 10;
    std::int64_t segments = 30; // per trial, 1 s each
    int classes = 2;
    std::int64_t channels = 8;
    double rate = 64.0;
    std::uint64_t seed = 1;
    double amplitude = 1.0;
    double noise = 0.5;
    std::string dimension = "planted";
};

Dataset synth_dataset(const SynthSpec& spec);

// --- csv import ----------------------------------------------------------------------

/// Parse one trial from CSV (one row per channel, comma-separated samples).
Tensor import_csv_trial(const std::string& path);

} // namespace fusenet
