#include "fusenet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fusenet/dsp.hpp"
#include "fusenet/rng.hpp"

namespace fs = std::filesystem;

namespace fusenet {

std::int64_t DatasetManifest::segment_samples() const {
    return static_cast<std::int64_t>(std::llround(sampling_rate * segment_seconds));
}

std::int64_t DatasetManifest::total_segments() const {
    std::int64_t n = 0;
    for (const auto& s : subjects)
        for (const auto& t : s.trials) n += t.segments;
    return n;
}

void DatasetManifest::validate() const {
    if (sampling_rate <= 0) throw DataError("manifest: non-positive sampling rate");
    if (channels < 1) throw DataError("manifest: channels must be >= 1");
    if (segment_seconds <= 0) throw DataError("manifest: non-positive segment length");
    if (subjects.empty()) throw DataError("manifest: no subjects");
    std::set<std::string> ids;
    std::int64_t trial_count = 0;
    for (const auto& s : subjects) {
        if (!ids.insert(s.id).second) throw DataError("manifest: duplicate subject id " + s.id);
        for (const auto& t : s.trials) {
            ++trial_count;
            if (t.segments < 1) {
                throw DataError("manifest: trial " + s.id + "/" + t.id + " has " +
                                std::to_string(t.segments) + " segments");
            }
            for (const auto& dim : dimensions) {
                if (!t.labels.count(dim)) {
                    throw DataError("manifest: trial " + s.id + "/" + t.id +
                                    " missing label for dimension " + dim);
                }
            }
        }
    }
    if (trial_count == 0) throw DataError("manifest: no trials");
}

std::vector<EegSegment> Dataset::cut_segments(std::int64_t samples_per_segment) const {
    const std::int64_t win =
        samples_per_segment > 0 ? samples_per_segment : manifest.segment_samples();
    std::vector<EegSegment> out;
    for (std::size_t si = 0; si < manifest.subjects.size(); ++si) {
        const auto& subj = manifest.subjects[si];
        for (std::size_t ti = 0; ti < subj.trials.size(); ++ti) {
            auto segs = segment_trial(trials[si][ti], manifest.sampling_rate,
                                      static_cast<double>(win) / manifest.sampling_rate,
                                      subj.id, subj.trials[ti].id);
            out.insert(out.end(), segs.begin(), segs.end());
        }
    }
    return out;
}

// --- store I/O -------------------------------------------------------------------

namespace {

nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["dataset"] = m.dataset;
    j["sampling_rate"] = m.sampling_rate;
    j["channels"] = m.channels;
    j["segment_seconds"] = m.segment_seconds;
    j["dimensions"] = m.dimensions;
    j["n_classes"] = m.n_classes;
    j["subjects"] = nlohmann::json::array();
    for (const auto& s : m.subjects) {
        nlohmann::json js;
        js["id"] = s.id;
        js["trials"] = nlohmann::json::array();
        for (const auto& t : s.trials) {
            nlohmann::json jt;
            jt["id"] = t.id;
            jt["segments"] = t.segments;
            jt["samples"] = t.total_samples;
            jt["blob"] = t.blob;
            nlohmann::json jl;
            for (const auto& [dim, lv] : t.labels) {
                jl[dim] = {{"score", lv.score}, {"class", lv.cls}};
            }
            jt["labels"] = jl;
            js["trials"].push_back(jt);
        }
        j["subjects"].push_back(js);
    }
    return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.dataset = j.at("dataset").get<std::string>();
        m.sampling_rate = j.at("sampling_rate").get<double>();
        m.channels = j.at("channels").get<std::int64_t>();
        m.segment_seconds = j.at("segment_seconds").get<double>();
        m.dimensions = j.at("dimensions").get<std::vector<std::string>>();
        for (const auto& [k, v] : j.at("n_classes").items()) {
            m.n_classes[k] = v.get<int>();
        }
        for (const auto& js : j.at("subjects")) {
            SubjectInfo s;
            s.id = js.at("id").get<std::string>();
            for (const auto& jt : js.at("trials")) {
                TrialInfo t;
                t.id = jt.at("id").get<std::string>();
                t.segments = jt.at("segments").get<std::int64_t>();
                t.total_samples = jt.at("samples").get<std::int64_t>();
                t.blob = jt.at("blob").get<std::string>();
                for (const auto& [dim, jl] : jt.at("labels").items()) {
                    t.labels[dim] = LabelValue{jl.at("score").get<double>(),
                                               jl.at("class").get<int>()};
                }
                s.trials.push_back(std::move(t));
            }
            m.subjects.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest: parse error: ") + e.what());
    }
    return m;
}

} // namespace

DatasetManifest load_manifest(const std::string& dir) {
    const fs::path path = fs::path(dir) / "manifest.json";
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest: invalid JSON in " + path.string() + ": " + e.what());
    }
    DatasetManifest m = manifest_from_json(j);
    m.root = dir;
    m.validate();
    for (const auto& s : m.subjects) {
        for (const auto& t : s.trials) {
            if (!fs::exists(fs::path(dir) / t.blob)) {
                throw DataError("manifest: missing blob " + t.blob + " for trial " + s.id + "/" +
                                t.id);
            }
        }
    }
    return m;
}

Dataset load_dataset(const std::string& dir) {
    Dataset ds;
    ds.manifest = load_manifest(dir);
    ds.trials.resize(ds.manifest.subjects.size());
    for (std::size_t si = 0; si < ds.manifest.subjects.size(); ++si) {
        const auto& subj = ds.manifest.subjects[si];
        for (const auto& t : subj.trials) {
            Tensor blob = load_tensor((fs::path(dir) / t.blob).string());
            if (blob.rank() != 2 || blob.extent(0) != ds.manifest.channels ||
                blob.extent(1) != t.total_samples) {
                throw DataError("blob " + t.blob + ": shape does not match manifest for trial " +
                                subj.id + "/" + t.id);
            }
            ds.trials[si].push_back(std::move(blob));
        }
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    ds.manifest.validate();
    fs::create_directories(fs::path(dir) / "blobs");
    DatasetManifest m = ds.manifest;
    for (std::size_t si = 0; si < m.subjects.size(); ++si) {
        auto& subj = m.subjects[si];
        if (ds.trials.size() <= si || ds.trials[si].size() != subj.trials.size()) {
            throw ContractError("save_dataset: trial tensors do not match the manifest");
        }
        for (std::size_t ti = 0; ti < subj.trials.size(); ++ti) {
            auto& t = subj.trials[ti];
            if (t.blob.empty()) t.blob = "blobs/" + subj.id + "_" + t.id + ".eft";
            const Tensor& trial = ds.trials[si][ti];
            save_tensor((fs::path(dir) / t.blob).string(), trial.to(DType::f32));
        }
    }
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw DataError("cannot write manifest in " + dir);
    out << manifest_to_json(m).dump(2) << "\n";
}

// --- preprocessing ----------------------------------------------------------------

void PreprocConfig::validate(double input_rate) const {
    const double nyquist = input_rate / 2.0;
    if (bandpass) {
        if (!(band_low > 0) || !(band_low < band_high)) {
            throw ConfigError("preprocess: band edges must satisfy 0 < low < high");
        }
        if (band_high >= nyquist) {
            throw ConfigError("preprocess: band edge " + std::to_string(band_high) +
                              " Hz at or above Nyquist " + std::to_string(nyquist));
        }
    }
    if (notch && notch_high >= nyquist) {
        throw ConfigError("preprocess: notch edge above Nyquist");
    }
    if (target_rate < 0) throw ConfigError("preprocess: negative target rate");
    if (segment_seconds <= 0) throw ConfigError("preprocess: non-positive segment length");
}

PreprocResult preprocess_trial(const Tensor& trial, double rate, const PreprocConfig& config) {
    if (trial.rank() != 2) throw DimensionError("preprocess: expected [C,N] trial");
    config.validate(rate);
    const std::int64_t c = trial.extent(0), n = trial.extent(1);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(c));
    for (std::int64_t ci = 0; ci < c; ++ci) {
        rows[static_cast<std::size_t>(ci)].resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            rows[static_cast<std::size_t>(ci)][static_cast<std::size_t>(i)] = trial[ci * n + i];
        }
    }
    if (config.common_average) {
        for (std::int64_t i = 0; i < n; ++i) {
            double m = 0.0;
            for (std::int64_t ci = 0; ci < c; ++ci) m += rows[static_cast<std::size_t>(ci)][static_cast<std::size_t>(i)];
            m /= static_cast<double>(c);
            for (std::int64_t ci = 0; ci < c; ++ci) rows[static_cast<std::size_t>(ci)][static_cast<std::size_t>(i)] -= m;
        }
    }
    if (config.bandpass) {
        const auto sections = dsp::butterworth_bandpass(4, config.band_low, config.band_high, rate);
        for (auto& row : rows) row = dsp::filtfilt(sections, row);
    }
    if (config.notch) {
        auto lp = dsp::butterworth_lowpass(4, config.notch_low, rate);
        auto hp = dsp::butterworth_highpass(4, config.notch_high, rate);
        for (auto& row : rows) {
            auto low = dsp::filtfilt(lp, row);
            auto high = dsp::filtfilt(hp, row);
            for (std::size_t i = 0; i < row.size(); ++i) row[i] = low[i] + high[i];
        }
    }
    double out_rate = rate;
    if (config.target_rate > 0 && config.target_rate != rate) {
        for (auto& row : rows) row = dsp::resample(row, rate, config.target_rate);
        out_rate = config.target_rate;
    }
    const auto n_out = static_cast<std::int64_t>(rows[0].size());
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(c * n_out));
    for (const auto& row : rows) flat.insert(flat.end(), row.begin(), row.end());
    return {Tensor({c, n_out}, std::move(flat), DType::f32), out_rate};
}

Dataset preprocess_dataset(const Dataset& ds, const PreprocConfig& config) {
    Dataset out;
    out.manifest = ds.manifest;
    out.manifest.segment_seconds = config.segment_seconds;
    out.trials.resize(ds.trials.size());
    double new_rate = ds.manifest.sampling_rate;
    for (std::size_t si = 0; si < ds.trials.size(); ++si) {
        for (std::size_t ti = 0; ti < ds.trials[si].size(); ++ti) {
            auto res = preprocess_trial(ds.trials[si][ti], ds.manifest.sampling_rate, config);
            new_rate = res.rate;
            out.trials[si].push_back(std::move(res.samples));
        }
    }
    out.manifest.sampling_rate = new_rate;
    const std::int64_t win = out.manifest.segment_samples();
    for (std::size_t si = 0; si < out.manifest.subjects.size(); ++si) {
        auto& subj = out.manifest.subjects[si];
        for (std::size_t ti = 0; ti < subj.trials.size(); ++ti) {
            auto& t = subj.trials[ti];
            t.total_samples = out.trials[si][ti].extent(1);
            t.segments = t.total_samples / win;
            t.blob.clear(); // re-assigned on save
            if (t.segments < 1) {
                throw DataError("preprocess: trial " + subj.id + "/" + t.id +
                                " shorter than one segment after resampling");
            }
        }
    }
    return out;
}

// --- segmentation / labels ----------------------------------------------------------

std::vector<EegSegment> segment_trial(const Tensor& trial, double rate, double seconds,
                                      const std::string& subject, const std::string& trial_id) {
    if (trial.rank() != 2) throw DimensionError("segment_trial: expected [C,N] trial");
    const std::int64_t win = static_cast<std::int64_t>(std::llround(rate * seconds));
    if (win < 1) throw ContractError("segment_trial: window shorter than one sample");
    const std::int64_t c = trial.extent(0), n = trial.extent(1);
    if (n < win) {
        throw ContractError("segment_trial: trial " + subject + "/" + trial_id + " has " +
                            std::to_string(n) + " samples, needs at least " +
                            std::to_string(win));
    }
    const std::int64_t count = n / win;
    std::vector<EegSegment> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) {
        std::vector<double> vals(static_cast<std::size_t>(c * win));
        for (std::int64_t ci = 0; ci < c; ++ci) {
            for (std::int64_t i = 0; i < win; ++i) {
                vals[static_cast<std::size_t>(ci * win + i)] = trial[ci * n + k * win + i];
            }
        }
        out.push_back(EegSegment{subject, trial_id, k,
                                 Tensor({c, win}, std::move(vals), trial.dtype())});
    }
    return out;
}

int binarize_label(double score, double threshold) {
    if (score < 1.0 || score > 9.0) {
        throw ContractError("binarize_label: score " + std::to_string(score) +
                            " outside [1,9]");
    }
    return score > threshold ? 1 : 0;
}

// --- synthetic corpus ---------------------------------------------------------------

Dataset synth_dataset(const SynthSpec& spec) {
    if (spec.subjects < 1 || spec.trials < 1 || spec.segments < 1 || spec.classes < 2 ||
        spec.channels < 1 || spec.rate <= 0) {
        throw ContractError("synth_dataset: all extents must be positive and classes >= 2");
    }
    const std::int64_t t_per_trial =
        spec.segments * static_cast<std::int64_t>(std::llround(spec.rate));

    // class-specific spatial mixing, shared across subjects
    std::vector<std::vector<double>> mixing(static_cast<std::size_t>(spec.classes));
    for (int k = 0; k < spec.classes; ++k) {
        Rng rng(Rng::derive(spec.seed, 1000 + static_cast<std::uint64_t>(k)));
        mixing[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(spec.channels));
        for (auto& w : mixing[static_cast<std::size_t>(k)]) w = 0.3 + 0.7 * rng.uniform();
    }

    Dataset ds;
    ds.manifest.dataset = "synth";
    ds.manifest.sampling_rate = spec.rate;
    ds.manifest.channels = spec.channels;
    ds.manifest.segment_seconds = 1.0;
    ds.manifest.dimensions = {spec.dimension};
    ds.manifest.n_classes[spec.dimension] = spec.classes;

    for (std::int64_t s = 0; s < spec.subjects; ++s) {
        SubjectInfo subj;
        {
            std::ostringstream id;
            id << "s" << (s + 1 < 10 ? "0" : "") << (s + 1);
            subj.id = id.str();
        }
        Rng subj_rng(Rng::derive(spec.seed, 2000 + static_cast<std::uint64_t>(s)));
        const double gain = 1.0 + 0.1 * subj_rng.normal();
        std::vector<Tensor> subj_trials;
        for (std::int64_t t = 0; t < spec.trials; ++t) {
            const int cls = static_cast<int>(t % spec.classes);
            const double freq = 6.0 * (cls + 1);
            Rng rng(Rng::derive(spec.seed,
                                3000 + static_cast<std::uint64_t>(s * spec.trials + t)));
            const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            std::vector<double> vals(static_cast<std::size_t>(spec.channels * t_per_trial));
            for (std::int64_t c = 0; c < spec.channels; ++c) {
                const double w = mixing[static_cast<std::size_t>(cls)][static_cast<std::size_t>(c)];
                double ar = 0.0;
                for (std::int64_t i = 0; i < t_per_trial; ++i) {
                    ar = 0.8 * ar + rng.normal() * 0.6; // AR(1) noise, low-frequency heavy
                    const double osc = std::sin(2.0 * 3.14159265358979323846 * freq *
                                                    static_cast<double>(i) / spec.rate +
                                                phase);
                    vals[static_cast<std::size_t>(c * t_per_trial + i)] =
                        gain * (spec.amplitude * w * osc + spec.noise * ar);
                }
            }
            TrialInfo info;
            {
                std::ostringstream id;
                id << "t" << (t + 1 < 10 ? "0" : "") << (t + 1);
                info.id = id.str();
            }
            info.segments = spec.segments;
            info.total_samples = t_per_trial;
            const double score = spec.classes == 2 ? (cls == 0 ? 3.0 : 7.0)
                                                   : static_cast<double>(cls);
            info.labels[spec.dimension] = LabelValue{score, cls};
            subj.trials.push_back(std::move(info));
            subj_trials.emplace_back(Tensor({spec.channels, t_per_trial}, std::move(vals),
                                            DType::f32));
        }
        ds.manifest.subjects.push_back(std::move(subj));
        ds.trials.push_back(std::move(subj_trials));
    }
    ds.manifest.validate();
    return ds;
}

// --- csv import ----------------------------------------------------------------------

Tensor import_csv_trial(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError("CSV " + path + ": line " + std::to_string(lineno) +
                                ": bad number '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError("CSV " + path + ": line " + std::to_string(lineno) + ": got " +
                            std::to_string(row.size()) + " columns, expected " +
                            std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("CSV " + path + ": empty file");
    const auto c = static_cast<std::int64_t>(rows.size());
    const auto n = static_cast<std::int64_t>(rows.front().size());
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(c * n));
    for (const auto& row : rows) flat.insert(flat.end(), row.begin(), row.end());
    return Tensor({c, n}, std::move(flat), DType::f32);
}

} // namespace fusenet
