#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fusenet/data.hpp"
#include "fusenet/dsp.hpp"
#include "fusenet/rng.hpp"

using namespace fusenet;
namespace fs = std::filesystem;

namespace {

Tensor sine_trial(std::int64_t c, std::int64_t n, double freq, double rate,
                  double amplitude = 1.0) {
    std::vector<double> vals(static_cast<std::size_t>(c * n));
    for (std::int64_t ci = 0; ci < c; ++ci) {
        for (std::int64_t i = 0; i < n; ++i) {
            vals[static_cast<std::size_t>(ci * n + i)] =
                amplitude * std::sin(2.0 * 3.14159265358979323846 * freq *
                                     static_cast<double>(i) / rate);
        }
    }
    return Tensor({c, n}, std::move(vals));
}

double rms(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

double rms(const Tensor& t) { return rms(t.values()); }

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("segment_trial: counts, remainder drop, lossless concatenation") {
    const double rate = 32.0;
    Tensor trial = sine_trial(2, static_cast<std::int64_t>(60 * rate), 5.0, rate);
    auto segs = segment_trial(trial, rate, 1.0, "s01", "t01");
    CHECK(segs.size() == 60); // one per second of a 60 s trial
    CHECK(segs.front().samples.shape() == std::vector<std::int64_t>{2, 32});
    CHECK(segs.front().index == 0);
    CHECK(segs.back().index == 59);

    // 1.5 s trial at 1 s windows keeps exactly one window
    Tensor short_trial = sine_trial(2, 48, 5.0, rate);
    CHECK(segment_trial(short_trial, rate, 1.0, "s", "t").size() == 1);

    // shorter than one window
    CHECK_THROWS_AS(segment_trial(sine_trial(2, 16, 5.0, rate), rate, 1.0, "s", "t"),
                    ContractError);

    // concatenating segments reproduces the trial prefix exactly
    for (std::int64_t ci = 0; ci < 2; ++ci) {
        for (std::size_t k = 0; k < segs.size(); ++k) {
            for (std::int64_t i = 0; i < 32; ++i) {
                CHECK(segs[k].samples.at({ci, i}) ==
                      trial.at({ci, static_cast<std::int64_t>(k) * 32 + i}));
            }
        }
    }
}

TEST_CASE("manifest arithmetic: 32 subjects x 40 trials x 60 segments") {
    SynthSpec spec;
    spec.subjects = 32;
    spec.trials = 40;
    spec.segments = 60;
    spec.channels = 2;
    spec.rate = 16;
    spec.classes = 2;
    Dataset ds = synth_dataset(spec);
    CHECK(ds.manifest.subjects.size() == 32);
    CHECK(ds.manifest.total_segments() == 76800);
    CHECK(ds.cut_segments().size() == 76800);
}

TEST_CASE("binarize_label: threshold rule and range contract") {
    CHECK(binarize_label(7.2) == 1);
    CHECK(binarize_label(3.0) == 0);
    CHECK(binarize_label(5.0) == 0); // strict inequality at the threshold
    CHECK(binarize_label(5.0 + 1e-9) == 1);
    CHECK_THROWS_AS(binarize_label(0.5), ContractError);
    CHECK_THROWS_AS(binarize_label(9.5), ContractError);
}

TEST_CASE("synth_dataset: separability probe, class counts, determinism") {
    SynthSpec spec;
    spec.subjects = 2;
    spec.trials = 10;
    spec.segments = 10;
    spec.channels = 8;
    spec.rate = 64;
    spec.classes = 2;
    spec.seed = 7;
    Dataset ds = synth_dataset(spec);

    // per-class trial counts match the round-robin plan
    int count0 = 0, count1 = 0;
    for (const auto& s : ds.manifest.subjects) {
        for (const auto& t : s.trials) {
            (t.labels.at("planted").cls == 0 ? count0 : count1)++;
        }
    }
    CHECK(count0 == 10);
    CHECK(count1 == 10);

    // oracle probe: classify each segment by which planted band dominates
    // (class 0 plants 6 Hz, class 1 plants 12 Hz)
    auto segs = ds.cut_segments();
    int correct = 0, total = 0;
    for (const auto& seg : segs) {
        int cls = -1;
        for (const auto& s : ds.manifest.subjects) {
            if (s.id != seg.subject) continue;
            for (const auto& t : s.trials) {
                if (t.id == seg.trial) cls = t.labels.at("planted").cls;
            }
        }
        double p0 = 0.0, p1 = 0.0;
        const std::int64_t c = seg.samples.extent(0), n = seg.samples.extent(1);
        for (std::int64_t ci = 0; ci < c; ++ci) {
            std::vector<double> row(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = seg.samples.at({ci, i});
            auto spec_row = dsp::periodogram_hann(row, spec.rate);
            p0 += dsp::band_power(spec_row, 4.0, 8.0);
            p1 += dsp::band_power(spec_row, 10.0, 14.0);
        }
        correct += ((p1 > p0 ? 1 : 0) == cls) ? 1 : 0;
        ++total;
    }
    CHECK(static_cast<double>(correct) / total >= 0.95);

    // identical seeds give bit-identical stores
    Dataset ds2 = synth_dataset(spec);
    for (std::size_t si = 0; si < ds.trials.size(); ++si) {
        for (std::size_t ti = 0; ti < ds.trials[si].size(); ++ti) {
            const auto& a = ds.trials[si][ti].values();
            const auto& b = ds2.trials[si][ti].values();
            CHECK(a == b);
        }
    }
}

TEST_CASE("store round-trip is bit-exact; corruption and absence are caught") {
    TempDir dir("fusenet_store_test");
    SynthSpec spec;
    spec.subjects = 2;
    spec.trials = 3;
    spec.segments = 4;
    spec.channels = 3;
    spec.rate = 32;
    Dataset ds = synth_dataset(spec);
    save_dataset(ds, dir.path.string());

    Dataset back = load_dataset(dir.path.string());
    CHECK(back.manifest.total_segments() == ds.manifest.total_segments());
    for (std::size_t si = 0; si < ds.trials.size(); ++si) {
        for (std::size_t ti = 0; ti < ds.trials[si].size(); ++ti) {
            CHECK(back.trials[si][ti].values() == ds.trials[si][ti].values());
        }
    }
    CHECK(back.manifest.subjects[0].trials[0].labels.at("planted").score ==
          ds.manifest.subjects[0].trials[0].labels.at("planted").score);

    // corrupt one blob's magic
    {
        const fs::path blob = dir.path / back.manifest.subjects[0].trials[0].blob;
        std::fstream f(blob, std::ios::in | std::ios::out | std::ios::binary);
        f.put('X');
    }
    CHECK_THROWS_AS(load_dataset(dir.path.string()), DataError);

    // missing blob is an integrity error on manifest load
    fs::remove(dir.path / back.manifest.subjects[0].trials[0].blob);
    CHECK_THROWS_AS(load_manifest(dir.path.string()), DataError);

    // a manifest with zero trials fails validation
    DatasetManifest empty;
    empty.dataset = "x";
    empty.sampling_rate = 32;
    empty.channels = 3;
    empty.subjects.push_back(SubjectInfo{"s01", {}});
    CHECK_THROWS_AS(empty.validate(), DataError);
}

TEST_CASE("preprocess: band-pass rejection, re-referencing, identity, idempotence") {
    const double rate = 128.0;
    { // 60 Hz sinusoid through the 4-45 Hz band-pass leaves < 5% RMS
        Tensor trial = sine_trial(1, 512, 60.0, rate);
        PreprocConfig cfg;
        cfg.common_average = false;
        auto out = preprocess_trial(trial, rate, cfg);
        CHECK(rms(out.samples) < 0.05 * rms(trial));
    }
    { // common-average output has zero channel mean at every sample
        Rng rng(3);
        std::vector<double> vals(4 * 256);
        for (auto& v : vals) v = rng.normal();
        Tensor trial({4, 256}, std::move(vals));
        PreprocConfig cfg;
        cfg.bandpass = false;
        auto out = preprocess_trial(trial, rate, cfg);
        for (std::int64_t i = 0; i < 256; ++i) {
            double m = 0.0;
            for (std::int64_t c = 0; c < 4; ++c) m += out.samples.at({c, i});
            CHECK(std::abs(m) < 1e-6);
        }
    }
    { // identity configuration returns the input unchanged
        Tensor trial = sine_trial(2, 256, 10.0, rate);
        PreprocConfig cfg;
        cfg.common_average = false;
        cfg.bandpass = false;
        auto out = preprocess_trial(trial, rate, cfg);
        CHECK(out.rate == rate);
        // stored as f32; compare against the f32 rounding of the input
        Tensor t32 = trial.to(DType::f32);
        CHECK(out.samples.values() == t32.values());
    }
    { // a second pass over an already-referenced, band-limited signal changes
      // RMS by < 1%; channels carry distinct amplitudes so the common-average
      // reference does not null the fixture
        std::vector<double> vals(3 * 1024);
        for (std::int64_t c = 0; c < 3; ++c) {
            for (std::int64_t i = 0; i < 1024; ++i) {
                vals[static_cast<std::size_t>(c * 1024 + i)] =
                    (1.0 + static_cast<double>(c)) *
                    std::sin(2.0 * 3.14159265358979323846 * 10.0 * static_cast<double>(i) / rate);
            }
        }
        Tensor trial({3, 1024}, std::move(vals));
        PreprocConfig cfg;
        auto once = preprocess_trial(trial, rate, cfg);
        auto twice = preprocess_trial(once.samples, rate, cfg);
        CHECK(std::abs(rms(twice.samples) - rms(once.samples)) < 0.01 * rms(once.samples));
    }
    { // band edge above Nyquist
        PreprocConfig cfg;
        cfg.band_high = 80.0;
        CHECK_THROWS_AS(preprocess_trial(sine_trial(1, 256, 10.0, rate), rate, cfg),
                        ConfigError);
    }
}

TEST_CASE("csv import: happy path and parse errors with location") {
    TempDir dir("fusenet_csv_test");
    const fs::path good = dir.path / "trial.csv";
    {
        std::ofstream out(good);
        out << "1.0,2.0,3.0\n4.0,5.0,6.0\n";
    }
    Tensor t = import_csv_trial(good.string());
    CHECK(t.shape() == std::vector<std::int64_t>{2, 3});
    CHECK(t.at({1, 2}) == 6.0);

    const fs::path bad = dir.path / "bad.csv";
    {
        std::ofstream out(bad);
        out << "1.0,2.0\n3.0,oops\n";
    }
    CHECK_THROWS_WITH_AS(import_csv_trial(bad.string()), doctest::Contains("line 2"), DataError);
    CHECK_THROWS_AS(import_csv_trial((dir.path / "absent.csv").string()), DataError);
}
