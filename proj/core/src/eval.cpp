#include "fusenet/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fusenet/rng.hpp"

namespace fusenet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

} // namespace

// --- fold planning -----------------------------------------------------------------

std::vector<FoldPlan> loocv_folds(const DatasetManifest& manifest, std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& s : manifest.subjects) ids.push_back(s.id);
    if (ids.size() < 2) {
        throw ContractError("loocv_folds: need at least 2 subjects, got " +
                            std::to_string(ids.size()));
    }
    std::sort(ids.begin(), ids.end());
    std::vector<FoldPlan> folds;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        FoldPlan plan;
        plan.held_out = ids[i];
        for (const auto& other : ids) {
            if (other != plan.held_out) plan.candidates.push_back(other);
        }
        plan.seed = Rng::derive(seed, i);
        folds.push_back(std::move(plan));
    }
    return folds;
}

void assert_no_leakage(const FoldPlan& plan, const std::vector<EegSegment>& candidates,
                       const std::vector<EegSegment>& test) {
    for (const auto& seg : candidates) {
        if (seg.subject == plan.held_out) {
            throw LeakageError("leakage trap: training candidate segment from held-out subject " +
                               plan.held_out);
        }
    }
    std::set<std::string> allowed(plan.candidates.begin(), plan.candidates.end());
    for (const auto& seg : candidates) {
        if (!allowed.count(seg.subject)) {
            throw LeakageError("leakage trap: candidate segment from unplanned subject " +
                               seg.subject);
        }
    }
    for (const auto& seg : test) {
        if (seg.subject != plan.held_out) {
            throw LeakageError("leakage trap: test segment from non-held-out subject " +
                               seg.subject);
        }
    }
}

// --- metrics -----------------------------------------------------------------------

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) {
        throw ContractError("accuracy: length mismatch (" + std::to_string(pred.size()) +
                            " vs " + std::to_string(truth.size()) + ")");
    }
    if (pred.empty()) throw ContractError("accuracy: empty labelings");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i] ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

double f1_score(const std::vector<int>& pred, const std::vector<int>& truth, int positive_class) {
    if (pred.size() != truth.size()) {
        throw ContractError("f1_score: length mismatch (" + std::to_string(pred.size()) +
                            " vs " + std::to_string(truth.size()) + ")");
    }
    if (pred.empty()) throw ContractError("f1_score: empty labelings");
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == positive_class;
        const bool t = truth[i] == positive_class;
        if (p && t) ++tp;
        if (p && !t) ++fp;
        if (!p && t) ++fn;
    }
    const double precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    const double recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 100.0 * 2.0 * precision * recall / (precision + recall);
}

double f1_macro(const std::vector<int>& pred, const std::vector<int>& truth, int n_classes) {
    if (n_classes < 1) throw ContractError("f1_macro: n_classes must be >= 1");
    double total = 0.0;
    for (int c = 0; c < n_classes; ++c) total += f1_score(pred, truth, c);
    return total / static_cast<double>(n_classes);
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) {
        throw ContractError("nmi: length mismatch (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
    }
    if (a.empty()) throw ContractError("nmi: empty labelings");
    const double n = static_cast<double>(a.size());
    std::map<int, double> pa, pb;
    std::map<std::pair<int, int>, double> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[a[i]] += 1.0;
        pb[b[i]] += 1.0;
        joint[{a[i], b[i]}] += 1.0;
    }
    double ha = 0.0, hb = 0.0, mi = 0.0;
    for (auto& [k, c] : pa) {
        const double p = c / n;
        ha -= p * std::log(p);
    }
    for (auto& [k, c] : pb) {
        const double p = c / n;
        hb -= p * std::log(p);
    }
    if (ha == 0.0 && hb == 0.0) return 1.0;
    if (ha == 0.0 || hb == 0.0) return 0.0;
    for (auto& [k, c] : joint) {
        const double p = c / n;
        mi += p * std::log(p * n * n / (pa[k.first] * pb[k.second]));
    }
    const double value = std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
    // identical-up-to-relabeling partitions must score exactly 1
    return value > 1.0 - 1e-12 ? 1.0 : value;
}

// --- experiment driver ---------------------------------------------------------------

std::string to_string(DecoderKind d) {
    switch (d) {
        case DecoderKind::hypergraph: return "hypergraph";
        case DecoderKind::simple_graph: return "simple-graph";
        case DecoderKind::pca_kmeans: return "pca-kmeans";
    }
    return "hypergraph";
}

DecoderKind parse_decoder(const std::string& name) {
    if (name == "hypergraph") return DecoderKind::hypergraph;
    if (name == "simple-graph" || name == "simple_graph") return DecoderKind::simple_graph;
    if (name == "pca-kmeans" || name == "pca_kmeans") return DecoderKind::pca_kmeans;
    throw ConfigError("unknown decoder '" + name +
                      "' (expected hypergraph, simple-graph or pca-kmeans)");
}

void EvalReport::finalize() {
    mean_p_acc.clear();
    mean_p_f.clear();
    mean_nmi.clear();
    std::map<std::string, int> counts;
    for (const auto& row : rows) {
        if (row.failed) continue;
        mean_p_acc[row.dimension] += row.p_acc;
        mean_p_f[row.dimension] += row.p_f;
        mean_nmi[row.dimension] += row.nmi_value;
        counts[row.dimension]++;
    }
    for (auto& [dim, total] : mean_p_acc) total /= counts[dim];
    for (auto& [dim, total] : mean_p_f) total /= counts[dim];
    for (auto& [dim, total] : mean_nmi) total /= counts[dim];
}

namespace {

Eigen::MatrixXd extract_fusenet_features(Generator& gen, const std::vector<EegSegment>& segs,
                                         DType precision) {
    const auto n = static_cast<std::int64_t>(segs.size());
    Eigen::MatrixXd out(n, gen.spec().latent);
    constexpr std::int64_t kChunk = 128;
    for (std::int64_t start = 0; start < n; start += kChunk) {
        std::vector<std::int64_t> idx;
        for (std::int64_t i = start; i < std::min(start + kChunk, n); ++i) idx.push_back(i);
        Tensor x = make_batch(segs, idx, precision);
        Tensor o = gen.encode_batch(x, BnMode::eval);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            for (std::int64_t c = 0; c < o.extent(1); ++c) {
                out(start + static_cast<std::int64_t>(r), c) =
                    o[static_cast<std::int64_t>(r) * o.extent(1) + c];
            }
        }
    }
    return out;
}

Eigen::MatrixXd extract_traditional_features(FeatureFamily family,
                                             const std::vector<EegSegment>& segs, double rate) {
    std::vector<std::vector<double>> rows;
    rows.reserve(segs.size());
    for (const auto& seg : segs) {
        FeatureVector f;
        switch (family) {
            case FeatureFamily::time_domain: f = time_domain_features(seg, rate); break;
            case FeatureFamily::band_power: f = band_power_features(seg, rate); break;
            case FeatureFamily::differential_entropy:
                f = differential_entropy_features(seg, rate);
                break;
            case FeatureFamily::eegfusenet:
                throw ContractError("extract_traditional_features: wrong family");
        }
        rows.push_back(std::move(f.values));
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return out;
}

struct LabelLookup {
    // (subject, trial) -> dimension -> class
    std::map<std::pair<std::string, std::string>, std::map<std::string, int>> classes;

    explicit LabelLookup(const DatasetManifest& m) {
        for (const auto& s : m.subjects) {
            for (const auto& t : s.trials) {
                auto& entry = classes[{s.id, t.id}];
                for (const auto& [dim, lv] : t.labels) entry[dim] = lv.cls;
            }
        }
    }

    int cls(const EegSegment& seg, const std::string& dim) const {
        return classes.at({seg.subject, seg.trial}).at(dim);
    }
};

void vote_per_trial_reduce(const std::vector<EegSegment>& test, std::vector<int>& pred,
                           std::vector<int>& truth, int n_classes) {
    std::map<std::string, std::vector<int>> votes;
    std::map<std::string, int> trial_truth;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& key = test[i].trial;
        if (!votes.count(key)) order.push_back(key);
        votes[key].push_back(pred[i]);
        trial_truth[key] = truth[i];
    }
    std::sort(order.begin(), order.end());
    std::vector<int> new_pred, new_truth;
    for (const auto& key : order) {
        std::vector<int> count(static_cast<std::size_t>(n_classes), 0);
        for (int p : votes[key]) count[static_cast<std::size_t>(p)]++;
        new_pred.push_back(static_cast<int>(
            std::max_element(count.begin(), count.end()) - count.begin()));
        new_truth.push_back(trial_truth[key]);
    }
    pred = std::move(new_pred);
    truth = std::move(new_truth);
}

std::vector<FoldRow> run_fold(const Dataset& ds, const EvalConfig& cfg, const FoldPlan& plan,
                              const std::vector<EegSegment>& all_segments,
                              const LabelLookup& lookup) {
    std::vector<EegSegment> cand, test;
    for (const auto& seg : all_segments) {
        (seg.subject == plan.held_out ? test : cand).push_back(seg);
    }
    assert_no_leakage(plan, cand, test);
    const auto& dims = ds.manifest.dimensions;
    auto failed_rows = [&](const std::string& why) {
        std::vector<FoldRow> rows;
        for (const auto& dim : dims) {
            FoldRow row;
            row.subject = plan.held_out;
            row.dimension = dim;
            row.failed = true;
            row.error = why;
            rows.push_back(row);
        }
        return rows;
    };
    if (test.empty()) return failed_rows("held-out subject has no segments");
    if (cand.empty()) return failed_rows("no training candidates");

    try {
        double train_s = 0.0, extract_s = 0.0;
        Eigen::MatrixXd cand_x, test_x;
        if (cfg.features == FeatureFamily::eegfusenet) {
            TrainConfig tc = cfg.train;
            tc.seed = plan.seed;
            const auto t0 = Clock::now();
            auto result = fit(cand, tc);
            train_s = seconds_since(t0);
            const auto t1 = Clock::now();
            cand_x = extract_fusenet_features(result.gen, cand, tc.precision);
            test_x = extract_fusenet_features(result.gen, test, tc.precision);
            extract_s = seconds_since(t1);
        } else {
            const auto t1 = Clock::now();
            const double rate = ds.manifest.sampling_rate;
            Eigen::MatrixXd cand_raw = extract_traditional_features(cfg.features, cand, rate);
            Eigen::MatrixXd test_raw = extract_traditional_features(cfg.features, test, rate);
            // fit the dimensionality map on training candidates only
            PcaMap map = fit_pca(cand_raw, cfg.decode.latent);
            cand_x = map.apply(cand_raw);
            test_x = map.apply(test_raw);
            extract_s = seconds_since(t1);
        }

        // one eta-subsample per fold, shared across emotion dimensions
        LabeledFeatures indexed;
        indexed.x = cand_x;
        indexed.labels.resize(cand.size());
        for (std::size_t i = 0; i < cand.size(); ++i) {
            indexed.labels[i] = static_cast<int>(i);
        }
        LabeledFeatures sub = subsample_training(indexed, cfg.decode.eta,
                                                 Rng::derive(plan.seed, 17));
        for (int row : sub.labels) {
            if (cand[static_cast<std::size_t>(row)].subject == plan.held_out) {
                throw LeakageError("leakage trap: held-out segment in the eta-subsample");
            }
        }

        std::vector<FoldRow> rows;
        for (std::size_t d = 0; d < dims.size(); ++d) {
            const auto& dim = dims[d];
            const int n_classes = ds.manifest.n_classes.at(dim);
            LabeledFeatures train;
            train.x = sub.x;
            train.labels.resize(sub.labels.size());
            for (std::size_t i = 0; i < sub.labels.size(); ++i) {
                train.labels[i] =
                    lookup.cls(cand[static_cast<std::size_t>(sub.labels[i])], dim);
            }
            std::vector<int> truth;
            truth.reserve(test.size());
            for (const auto& seg : test) truth.push_back(lookup.cls(seg, dim));

            DecodeConfig dc = cfg.decode;
            dc.n_classes = n_classes;
            dc.seed = Rng::derive(plan.seed, 23 + d);
            const auto t2 = Clock::now();
            std::vector<int> pred;
            switch (cfg.decoder) {
                case DecoderKind::hypergraph:
                    pred = decode_fold(train, test_x, dc).predictions;
                    break;
                case DecoderKind::simple_graph:
                    pred = simple_graph_baseline(train, test_x, dc);
                    break;
                case DecoderKind::pca_kmeans:
                    pred = pca_kmeans_baseline(train, test_x, dc);
                    break;
            }
            const double decode_s = seconds_since(t2);
            std::vector<int> scored_pred = pred, scored_truth = truth;
            if (cfg.vote_per_trial) {
                vote_per_trial_reduce(test, scored_pred, scored_truth, n_classes);
            }
            FoldRow row;
            row.subject = plan.held_out;
            row.dimension = dim;
            row.p_acc = accuracy(scored_pred, scored_truth);
            row.p_f = (n_classes == 2 && !cfg.macro_f1)
                          ? f1_score(scored_pred, scored_truth, 1)
                          : f1_macro(scored_pred, scored_truth, n_classes);
            row.nmi_value = nmi(scored_pred, scored_truth);
            row.train_seconds = train_s;
            row.extract_seconds = extract_s;
            row.decode_seconds = decode_s;
            rows.push_back(std::move(row));
        }
        return rows;
    } catch (const LeakageError&) {
        throw; // the trap is always fatal
    } catch (const std::exception& e) {
        return failed_rows(e.what());
    }
}

} // namespace

EvalReport run_experiment(const Dataset& ds, const EvalConfig& cfg) {
    cfg.decode.validate();
    const auto folds = loocv_folds(ds.manifest, cfg.seed);
    const auto segments = ds.cut_segments(cfg.segment_samples);
    const LabelLookup lookup(ds.manifest);

    std::vector<std::vector<FoldRow>> results(folds.size());
    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < folds.size(); ++i) {
            results[i] = run_fold(ds, cfg, folds[i], segments, lookup);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= folds.size()) return;
                try {
                    results[i] = run_fold(ds, cfg, folds[i], segments, lookup);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < std::min<int>(jobs, static_cast<int>(folds.size())); ++w) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    EvalReport report;
    report.features = to_string(cfg.features);
    report.decoder = to_string(cfg.decoder);
    report.kappa = cfg.decode.kappa;
    report.eta = cfg.decode.eta;
    report.latent = cfg.decode.latent;
    report.seed = cfg.seed;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        bool first_row = true;
        for (auto& row : results[i]) {
            if (first_row && !row.failed) {
                report.train_seconds += row.train_seconds;
                report.extract_seconds += row.extract_seconds;
                first_row = false;
            }
            report.decode_seconds += row.decode_seconds;
            report.rows.push_back(std::move(row));
        }
    }
    report.finalize();
    return report;
}

// --- sweeps ------------------------------------------------------------------------

std::vector<SweepPoint> sweep_kappa(const Dataset& ds, const EvalConfig& base,
                                    const std::vector<int>& kappas) {
    if (kappas.empty()) throw ContractError("sweep_kappa: empty grid");
    std::vector<SweepPoint> out;
    for (int k : kappas) {
        EvalConfig cfg = base;
        cfg.decode.kappa = k;
        out.push_back(SweepPoint{"kappa", static_cast<double>(k), run_experiment(ds, cfg)});
    }
    return out;
}

std::vector<SweepPoint> sweep_eta(const Dataset& ds, const EvalConfig& base,
                                  const std::vector<double>& etas) {
    if (etas.empty()) throw ContractError("sweep_eta: empty grid");
    std::vector<SweepPoint> out;
    for (double e : etas) {
        EvalConfig cfg = base;
        cfg.decode.eta = e;
        out.push_back(SweepPoint{"eta", e, run_experiment(ds, cfg)});
    }
    return out;
}

std::vector<SweepPoint> sweep_input_size(const Dataset& ds, const EvalConfig& base,
                                         const std::vector<std::int64_t>& sizes) {
    if (sizes.empty()) throw ContractError("sweep_input_size: empty grid");
    std::vector<SweepPoint> out;
    for (std::int64_t t : sizes) {
        EvalConfig cfg = base;
        cfg.segment_samples = t;
        out.push_back(
            SweepPoint{"input_size", static_cast<double>(t), run_experiment(ds, cfg)});
    }
    return out;
}

void write_sweep_timing_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
    out << "param,value,train_seconds,extract_seconds,decode_seconds,overall_seconds\n";
    out << std::setprecision(17);
    for (const auto& p : points) {
        const double overall =
            p.report.train_seconds + p.report.extract_seconds + p.report.decode_seconds;
        out << p.param << ',' << p.value << ',' << p.report.train_seconds << ','
            << p.report.extract_seconds << ',' << p.report.decode_seconds << ',' << overall
            << "\n";
    }
}

// --- report I/O ----------------------------------------------------------------------

namespace {

std::string sanitize(std::string s) {
    for (auto& c : s) {
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    return s;
}

} // namespace

void write_report_csv(std::ostream& out, const EvalReport& report) {
    out << std::setprecision(17);
    out << "# features=" << report.features << ";decoder=" << report.decoder
        << ";kappa=" << report.kappa << ";eta=" << report.eta << ";latent=" << report.latent
        << ";seed=" << report.seed << ";train_seconds=" << report.train_seconds
        << ";extract_seconds=" << report.extract_seconds
        << ";decode_seconds=" << report.decode_seconds << "\n";
    out << "subject,dimension,p_acc,p_f,nmi,train_seconds,extract_seconds,decode_seconds,"
           "failed,error\n";
    for (const auto& row : report.rows) {
        out << row.subject << ',' << row.dimension << ',' << row.p_acc << ',' << row.p_f << ','
            << row.nmi_value << ',' << row.train_seconds << ',' << row.extract_seconds << ','
            << row.decode_seconds << ',' << (row.failed ? 1 : 0) << ',' << sanitize(row.error)
            << "\n";
    }
}

EvalReport parse_report_csv(std::istream& in) {
    EvalReport report;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw DataError("report csv: missing config header line");
    }
    {
        std::stringstream header(line.substr(2));
        std::string kv;
        while (std::getline(header, kv, ';')) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = kv.substr(0, eq);
            const std::string value = kv.substr(eq + 1);
            if (key == "features") report.features = value;
            else if (key == "decoder") report.decoder = value;
            else if (key == "kappa") report.kappa = std::stoi(value);
            else if (key == "eta") report.eta = std::stod(value);
            else if (key == "latent") report.latent = std::stoll(value);
            else if (key == "seed") report.seed = std::stoull(value);
            else if (key == "train_seconds") report.train_seconds = std::stod(value);
            else if (key == "extract_seconds") report.extract_seconds = std::stod(value);
            else if (key == "decode_seconds") report.decode_seconds = std::stod(value);
        }
    }
    if (!std::getline(in, line) || line.rfind("subject,", 0) != 0) {
        throw DataError("report csv: missing column header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 9) throw DataError("report csv: malformed row: " + line);
        FoldRow row;
        row.subject = cells[0];
        row.dimension = cells[1];
        try {
            row.p_acc = std::stod(cells[2]);
            row.p_f = std::stod(cells[3]);
            row.nmi_value = std::stod(cells[4]);
            row.train_seconds = std::stod(cells[5]);
            row.extract_seconds = std::stod(cells[6]);
            row.decode_seconds = std::stod(cells[7]);
            row.failed = std::stoi(cells[8]) != 0;
        } catch (const std::exception&) {
            throw DataError("report csv: bad numeric cell in row: " + line);
        }
        if (cells.size() > 9) row.error = cells[9];
        report.rows.push_back(std::move(row));
    }
    report.finalize();
    return report;
}

void write_report_json(std::ostream& out, const EvalReport& report) {
    nlohmann::json j;
    j["features"] = report.features;
    j["decoder"] = report.decoder;
    j["kappa"] = report.kappa;
    j["eta"] = report.eta;
    j["latent"] = report.latent;
    j["seed"] = report.seed;
    j["train_seconds"] = report.train_seconds;
    j["extract_seconds"] = report.extract_seconds;
    j["decode_seconds"] = report.decode_seconds;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : report.rows) {
        j["rows"].push_back({
            {"subject", row.subject},
            {"dimension", row.dimension},
            {"p_acc", row.p_acc},
            {"p_f", row.p_f},
            {"nmi", row.nmi_value},
            {"train_seconds", row.train_seconds},
            {"extract_seconds", row.extract_seconds},
            {"decode_seconds", row.decode_seconds},
            {"failed", row.failed},
            {"error", row.error},
        });
    }
    j["mean_p_acc"] = report.mean_p_acc;
    j["mean_p_f"] = report.mean_p_f;
    j["mean_nmi"] = report.mean_nmi;
    out << j.dump(2) << "\n";
}

EvalReport parse_report_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report json: parse error: ") + e.what());
    }
    EvalReport report;
    try {
        report.features = j.at("features").get<std::string>();
        report.decoder = j.at("decoder").get<std::string>();
        report.kappa = j.at("kappa").get<int>();
        report.eta = j.at("eta").get<double>();
        report.latent = j.at("latent").get<std::int64_t>();
        report.seed = j.at("seed").get<std::uint64_t>();
        report.train_seconds = j.at("train_seconds").get<double>();
        report.extract_seconds = j.at("extract_seconds").get<double>();
        report.decode_seconds = j.at("decode_seconds").get<double>();
        for (const auto& jr : j.at("rows")) {
            FoldRow row;
            row.subject = jr.at("subject").get<std::string>();
            row.dimension = jr.at("dimension").get<std::string>();
            row.p_acc = jr.at("p_acc").get<double>();
            row.p_f = jr.at("p_f").get<double>();
            row.nmi_value = jr.at("nmi").get<double>();
            row.train_seconds = jr.at("train_seconds").get<double>();
            row.extract_seconds = jr.at("extract_seconds").get<double>();
            row.decode_seconds = jr.at("decode_seconds").get<double>();
            row.failed = jr.at("failed").get<bool>();
            row.error = jr.at("error").get<std::string>();
            report.rows.push_back(std::move(row));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report json: missing field: ") + e.what());
    }
    report.finalize();
    return report;
}

void write_comparison_table(std::ostream& out,
                            const std::vector<std::pair<std::string, EvalReport>>& runs) {
    if (runs.empty()) throw ContractError("write_comparison_table: no runs");
    std::vector<std::string> dims;
    for (const auto& [dim, v] : runs.front().second.mean_p_acc) dims.push_back(dim);
    out << "method";
    for (const auto& dim : dims) {
        out << ',' << dim << "_p_acc," << dim << "_p_f," << dim << "_nmi";
    }
    out << "\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& [name, report] : runs) {
        out << name;
        for (const auto& dim : dims) {
            out << ',' << report.mean_p_acc.at(dim) << ',' << report.mean_p_f.at(dim) << ','
                << report.mean_nmi.at(dim);
        }
        out << "\n";
    }
}

} // namespace fusenet
