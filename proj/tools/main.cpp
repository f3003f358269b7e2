#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "fusenet/data.hpp"
#include "fusenet/eval.hpp"
#include "fusenet/features.hpp"
#include "fusenet/hypergraph.hpp"
#include "fusenet/model.hpp"
#include "fusenet/rng.hpp"
#include "fusenet/trainer.hpp"

namespace fs = std::filesystem;
using namespace fusenet;

namespace {

struct Options {
    std::string manifest;
    std::string out = ".";
    std::string config_path;
    std::string variant = "cnn-rnn-gan";
    std::string features = "fusenet";
    std::string decoder = "hypergraph";
    int kappa = 5;
    double eta = 10.0;
    std::int64_t latent = 64;
    double lambda = 10.0;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool vote_per_trial = false;
    bool macro_f1 = false;

    // training
    std::int64_t epochs = 100;
    std::int64_t batch_size = 128;
    double lr_generator = 0.001;
    double lr_discriminator = 0.0002;
    double validation_fraction = 0.1;
    std::int64_t base_filters = 16;
    std::int64_t depth_multiplier = 2;
    std::int64_t gru_hidden = 32;
    std::string precision = "f32";
    std::int64_t segment_samples = 0;
};

void add_shared_flags(CLI::App* cmd, Options& opt, bool needs_manifest = true) {
    if (needs_manifest) {
        cmd->add_option("--manifest", opt.manifest, "Dataset store directory")->required();
    }
    cmd->add_option("--variant", opt.variant,
                    "Network variant: cnn, cnn-gan, cnn-rnn, cnn-rnn-gan");
    cmd->add_option("--features", opt.features, "Feature source: fusenet, time, psd, de");
    cmd->add_option("--decoder", opt.decoder,
                    "Decoder: hypergraph, simple-graph, pca-kmeans");
    cmd->add_option("--kappa", opt.kappa, "Neighbours per hyperedge");
    cmd->add_option("--eta", opt.eta, "Percent of training candidates kept");
    cmd->add_option("--latent", opt.latent, "Fused feature size");
    cmd->add_option("--lambda", opt.lambda, "Reconstruction weight in the adversarial loss");
    cmd->add_option("--seed", opt.seed, "Master seed");
    cmd->add_option("--jobs", opt.jobs, "Parallel folds");
    cmd->add_flag("--vote-per-trial", opt.vote_per_trial,
                  "Score one majority prediction per trial");
    cmd->add_flag("--macro-f1", opt.macro_f1, "Macro-averaged F1 instead of positive-class F1");
    cmd->add_option("--out", opt.out, "Output directory");
    cmd->add_option("--config", opt.config_path, "JSON file overriding flags");
    cmd->add_option("--epochs", opt.epochs, "Training epochs");
    cmd->add_option("--batch", opt.batch_size, "Mini-batch size");
    cmd->add_option("--lr-g", opt.lr_generator, "Generator learning rate");
    cmd->add_option("--lr-d", opt.lr_discriminator, "Discriminator learning rate");
    cmd->add_option("--val-fraction", opt.validation_fraction, "Validation trial fraction");
    cmd->add_option("--filters", opt.base_filters, "Temporal filter count");
    cmd->add_option("--depth-mult", opt.depth_multiplier, "Depthwise multiplier");
    cmd->add_option("--gru-hidden", opt.gru_hidden, "GRU hidden size");
    cmd->add_option("--precision", opt.precision, "Training precision: f32 or f64");
    cmd->add_option("--input-size", opt.segment_samples,
                    "Override samples per segment (0 = manifest)");
}

// --config values take precedence over command-line flags
void apply_config_json(Options& opt) {
    if (opt.config_path.empty()) return;
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot open config: " + opt.config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + opt.config_path + ": " + e.what());
    }
    auto set_str = [&](const char* k, std::string& v) { if (j.contains(k)) v = j.at(k).get<std::string>(); };
    auto set_i64 = [&](const char* k, std::int64_t& v) { if (j.contains(k)) v = j.at(k).get<std::int64_t>(); };
    auto set_int = [&](const char* k, int& v) { if (j.contains(k)) v = j.at(k).get<int>(); };
    auto set_dbl = [&](const char* k, double& v) { if (j.contains(k)) v = j.at(k).get<double>(); };
    auto set_u64 = [&](const char* k, std::uint64_t& v) { if (j.contains(k)) v = j.at(k).get<std::uint64_t>(); };
    auto set_bool = [&](const char* k, bool& v) { if (j.contains(k)) v = j.at(k).get<bool>(); };
    set_str("variant", opt.variant);
    set_str("features", opt.features);
    set_str("decoder", opt.decoder);
    set_int("kappa", opt.kappa);
    set_dbl("eta", opt.eta);
    set_i64("latent", opt.latent);
    set_dbl("lambda", opt.lambda);
    set_u64("seed", opt.seed);
    set_int("jobs", opt.jobs);
    set_bool("vote_per_trial", opt.vote_per_trial);
    set_bool("macro_f1", opt.macro_f1);
    set_i64("epochs", opt.epochs);
    set_i64("batch_size", opt.batch_size);
    set_dbl("lr_generator", opt.lr_generator);
    set_dbl("lr_discriminator", opt.lr_discriminator);
    set_dbl("validation_fraction", opt.validation_fraction);
    set_i64("base_filters", opt.base_filters);
    set_i64("depth_multiplier", opt.depth_multiplier);
    set_i64("gru_hidden", opt.gru_hidden);
    set_str("precision", opt.precision);
    set_i64("input_size", opt.segment_samples);
}

DType parse_precision(const std::string& p) {
    if (p == "f32") return DType::f32;
    if (p == "f64") return DType::f64;
    throw ConfigError("precision must be f32 or f64, got '" + p + "'");
}

TrainConfig train_config(const Options& opt) {
    TrainConfig tc;
    tc.variant = parse_variant(opt.variant);
    tc.lr_generator = opt.lr_generator;
    tc.lr_discriminator = opt.lr_discriminator;
    tc.batch_size = opt.batch_size;
    tc.max_epochs = opt.epochs;
    tc.lambda_l1 = opt.lambda;
    tc.validation_fraction = opt.validation_fraction;
    tc.seed = opt.seed;
    tc.base_filters = opt.base_filters;
    tc.depth_multiplier = opt.depth_multiplier;
    tc.gru_hidden = opt.gru_hidden;
    tc.latent = opt.latent;
    tc.precision = parse_precision(opt.precision);
    return tc;
}

EvalConfig eval_config(const Options& opt) {
    EvalConfig cfg;
    cfg.features = parse_feature_family(opt.features);
    cfg.decoder = parse_decoder(opt.decoder);
    cfg.train = train_config(opt);
    cfg.decode.kappa = opt.kappa;
    cfg.decode.eta = opt.eta;
    cfg.decode.latent = opt.latent;
    cfg.decode.seed = opt.seed;
    cfg.vote_per_trial = opt.vote_per_trial;
    cfg.macro_f1 = opt.macro_f1;
    cfg.jobs = opt.jobs;
    cfg.segment_samples = opt.segment_samples;
    cfg.seed = opt.seed;
    return cfg;
}

std::vector<EegSegment> manifest_segments(const Dataset& ds, const Options& opt) {
    return ds.cut_segments(opt.segment_samples);
}

struct FeatureStore {
    std::vector<EegSegment> identity; // samples tensors left empty
    Eigen::MatrixXd x;
};

void save_feature_store(const std::string& dir, const std::vector<FeatureVector>& features) {
    fs::create_directories(dir);
    {
        std::ofstream csv(fs::path(dir) / "features.csv");
        if (!csv) throw DataError("cannot write features.csv in " + dir);
        write_features_csv(csv, features);
    }
    const auto n = static_cast<std::int64_t>(features.size());
    const auto d = static_cast<std::int64_t>(features.front().values.size());
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(n * d));
    for (const auto& f : features) flat.insert(flat.end(), f.values.begin(), f.values.end());
    save_tensor((fs::path(dir) / "features.eft").string(), Tensor({n, d}, std::move(flat)));
}

FeatureStore load_feature_store(const std::string& dir) {
    FeatureStore store;
    Tensor t = load_tensor((fs::path(dir) / "features.eft").string());
    store.x = tensor_to_matrix(t);
    std::ifstream csv(fs::path(dir) / "features.csv");
    if (!csv) throw DataError("cannot open features.csv in " + dir);
    std::string line;
    std::getline(csv, line); // header
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string subject, trial, segment;
        std::getline(ss, subject, ',');
        std::getline(ss, trial, ',');
        std::getline(ss, segment, ',');
        EegSegment seg;
        seg.subject = subject;
        seg.trial = trial;
        try {
            seg.index = std::stoll(segment);
        } catch (const std::exception&) {
            throw DataError("features.csv: bad segment index in row: " + line);
        }
        store.identity.push_back(std::move(seg));
    }
    if (static_cast<std::int64_t>(store.identity.size()) != store.x.rows()) {
        throw DataError("feature store: csv rows (" + std::to_string(store.identity.size()) +
                        ") do not match tensor rows (" + std::to_string(store.x.rows()) + ")");
    }
    return store;
}

std::vector<FeatureVector> extract_features(const Dataset& ds, const Options& opt,
                                            const std::string& checkpoint_path) {
    const auto segments = manifest_segments(ds, opt);
    const FeatureFamily family = parse_feature_family(opt.features);
    std::vector<FeatureVector> out;
    out.reserve(segments.size());
    if (family == FeatureFamily::eegfusenet) {
        if (checkpoint_path.empty()) {
            throw ConfigError("extract: --checkpoint is required for --features fusenet");
        }
        Checkpoint ckpt = load_checkpoint(checkpoint_path);
        const auto& spec = ckpt.gen.spec();
        const auto t = segments.front().samples.extent(1);
        if (spec.channels != segments.front().samples.extent(0) || spec.timepoints != t) {
            throw DataError("extract: checkpoint expects " + std::to_string(spec.channels) +
                            "x" + std::to_string(spec.timepoints) + " segments, manifest has " +
                            std::to_string(segments.front().samples.extent(0)) + "x" +
                            std::to_string(t));
        }
        constexpr std::int64_t kChunk = 128;
        const auto n = static_cast<std::int64_t>(segments.size());
        for (std::int64_t start = 0; start < n; start += kChunk) {
            std::vector<std::int64_t> idx;
            for (std::int64_t i = start; i < std::min(start + kChunk, n); ++i) idx.push_back(i);
            Tensor x = make_batch(segments, idx, spec.dtype);
            Tensor o = ckpt.gen.encode_batch(x, BnMode::eval);
            for (std::size_t r = 0; r < idx.size(); ++r) {
                const auto& seg = segments[static_cast<std::size_t>(idx[r])];
                FeatureVector f;
                f.family = family;
                f.subject = seg.subject;
                f.trial = seg.trial;
                f.segment = seg.index;
                f.values.resize(static_cast<std::size_t>(o.extent(1)));
                for (std::int64_t c = 0; c < o.extent(1); ++c) {
                    f.values[static_cast<std::size_t>(c)] =
                        o[static_cast<std::int64_t>(r) * o.extent(1) + c];
                }
                out.push_back(std::move(f));
            }
        }
        return out;
    }
    for (const auto& seg : segments) {
        switch (family) {
            case FeatureFamily::time_domain:
                out.push_back(time_domain_features(seg, ds.manifest.sampling_rate));
                break;
            case FeatureFamily::band_power:
                out.push_back(band_power_features(seg, ds.manifest.sampling_rate));
                break;
            case FeatureFamily::differential_entropy:
                out.push_back(differential_entropy_features(seg, ds.manifest.sampling_rate));
                break;
            default: break;
        }
    }
    return out;
}

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw ConfigError("bad grid value '" + cell + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty grid");
    return out;
}

int dispatch(CLI::App& app, Options& opt, int argc, char** argv);

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised EEG feature fusion and hypergraph decoding"};
    app.require_subcommand(1);
    Options opt;
    try {
        return dispatch(app, opt, argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence/leakage: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

namespace {

int dispatch(CLI::App& app, Options& opt, int argc, char** argv) {
    // synth ---------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a planted-signal synthetic corpus");
    SynthSpec synth_spec;
    add_shared_flags(synth, opt, /*needs_manifest=*/false);
    synth->add_option("--subjects", synth_spec.subjects, "Subject count");
    synth->add_option("--trials", synth_spec.trials, "Trials per subject");
    synth->add_option("--segments", synth_spec.segments, "1 s segments per trial");
    synth->add_option("--classes", synth_spec.classes, "Planted class count");
    synth->add_option("--channels", synth_spec.channels, "Channel count");
    synth->add_option("--rate", synth_spec.rate, "Sampling rate (Hz)");
    synth->add_option("--amplitude", synth_spec.amplitude, "Planted oscillation amplitude");
    synth->add_option("--noise", synth_spec.noise, "Noise level");

    // preprocess ----------------------------------------------------------
    auto* prep = app.add_subcommand("preprocess", "Re-reference, band-pass and resample a store");
    PreprocConfig prep_cfg;
    bool no_car = false;
    bool no_bandpass = false;
    add_shared_flags(prep, opt);
    prep->add_option("--band-low", prep_cfg.band_low, "Band-pass low edge (Hz)");
    prep->add_option("--band-high", prep_cfg.band_high, "Band-pass high edge (Hz)");
    prep->add_flag("--notch", prep_cfg.notch, "Enable the mains notch");
    prep->add_flag("--no-car", no_car, "Skip common-average re-referencing");
    prep->add_flag("--no-bandpass", no_bandpass, "Skip the band-pass");
    prep->add_option("--target-rate", prep_cfg.target_rate, "Resample to this rate (0 keeps)");
    prep->add_option("--segment-seconds", prep_cfg.segment_seconds, "Segment length (s)");

    // import-csv ----------------------------------------------------------
    auto* import = app.add_subcommand("import-csv", "Append a per-trial CSV (rows = channels)");
    std::string import_file, import_subject, import_trial, import_dataset = "imported";
    double import_rate = 0.0;
    std::vector<std::string> import_labels, import_classes;
    add_shared_flags(import, opt, /*needs_manifest=*/false);
    import->add_option("file", import_file, "CSV file")->required();
    import->add_option("--rate", import_rate, "Sampling rate (Hz)")->required();
    import->add_option("--subject", import_subject, "Subject id")->required();
    import->add_option("--trial", import_trial, "Trial id")->required();
    import->add_option("--dataset", import_dataset, "Dataset name for a fresh store");
    import->add_option("--label", import_labels,
                       "dim=score (score in [1,9], binarized at 5)");
    import->add_option("--label-class", import_classes, "dim=class (raw class index)");

    // train ---------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Fit the network on a store (unsupervised)");
    std::string exclude_subject;
    add_shared_flags(train, opt);
    train->add_option("--exclude-subject", exclude_subject,
                      "Hold this subject out of training");

    // extract ---------------------------------------------------------------
    auto* extract = app.add_subcommand("extract", "Write per-segment features");
    std::string checkpoint_path;
    add_shared_flags(extract, opt);
    extract->add_option("--checkpoint", checkpoint_path, "Checkpoint for --features fusenet");

    // decode ----------------------------------------------------------------
    auto* decode = app.add_subcommand("decode", "Decode one held-out subject from features");
    std::string decode_features_dir, decode_subject, dump_dir;
    add_shared_flags(decode, opt);
    decode->add_option("--features-dir", decode_features_dir, "Directory from `extract`")
        ->required();
    decode->add_option("--test-subject", decode_subject, "Held-out subject id")->required();
    decode->add_option("--dump", dump_dir, "Dump incidence/weights/Laplacian/embedding here");

    // evaluate ----------------------------------------------------------------
    auto* evaluate = app.add_subcommand("evaluate", "Leave-one-subject-out experiment");
    add_shared_flags(evaluate, opt);

    // sweep ---------------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Grid sweeps over kappa / eta / input size");
    std::string kappa_grid, eta_grid, t_grid;
    add_shared_flags(sweep, opt);
    sweep->add_option("--kappa-grid", kappa_grid, "Comma list of kappa values");
    sweep->add_option("--eta-grid", eta_grid, "Comma list of eta percentages");
    sweep->add_option("--t-grid", t_grid, "Comma list of segment sample counts");

    // report -----------------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "Convert or tabulate reports");
    std::vector<std::string> report_inputs;
    std::string report_format = "csv";
    bool report_table = false;
    add_shared_flags(report_cmd, opt, /*needs_manifest=*/false);
    report_cmd->add_option("inputs", report_inputs, "report.json / report.csv files")
        ->required();
    report_cmd->add_option("--format", report_format, "Output format: csv or json");
    report_cmd->add_flag("--table", report_table,
                         "Emit one comparison table over all inputs");

    app.parse(argc, argv);
    apply_config_json(opt);

    if (*synth) {
        synth_spec.seed = opt.seed;
        Dataset ds = synth_dataset(synth_spec);
        save_dataset(ds, opt.out);
        std::cout << "wrote " << ds.manifest.total_segments() << " segments ("
                  << synth_spec.subjects << " subjects x " << synth_spec.trials << " trials) to "
                  << opt.out << "\n";
        return 0;
    }
    if (*prep) {
        prep_cfg.common_average = !no_car;
        prep_cfg.bandpass = !no_bandpass;
        Dataset ds = load_dataset(opt.manifest);
        Dataset out = preprocess_dataset(ds, prep_cfg);
        save_dataset(out, opt.out);
        std::cout << "preprocessed store written to " << opt.out << "\n";
        return 0;
    }
    if (*import) {
        Tensor trial = import_csv_trial(import_file);
        Dataset ds;
        bool fresh = true;
        if (fs::exists(fs::path(opt.out) / "manifest.json")) {
            ds = load_dataset(opt.out);
            fresh = false;
            if (ds.manifest.channels != trial.extent(0)) {
                throw DataError("import-csv: store has " + std::to_string(ds.manifest.channels) +
                                " channels, file has " + std::to_string(trial.extent(0)));
            }
            if (ds.manifest.sampling_rate != import_rate) {
                throw DataError("import-csv: store rate differs from --rate");
            }
        } else {
            ds.manifest.dataset = import_dataset;
            ds.manifest.sampling_rate = import_rate;
            ds.manifest.channels = trial.extent(0);
            ds.manifest.segment_seconds = 1.0;
        }
        TrialInfo info;
        info.id = import_trial;
        info.total_samples = trial.extent(1);
        info.segments = trial.extent(1) / ds.manifest.segment_samples();
        if (info.segments < 1) throw DataError("import-csv: trial shorter than one segment");
        auto parse_kv = [](const std::string& s) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("label '" + s + "' is not dim=value");
            }
            return std::make_pair(s.substr(0, eq), s.substr(eq + 1));
        };
        for (const auto& l : import_labels) {
            auto [dim, value] = parse_kv(l);
            const double score = std::stod(value);
            info.labels[dim] = LabelValue{score, binarize_label(score)};
            if (std::find(ds.manifest.dimensions.begin(), ds.manifest.dimensions.end(), dim) ==
                ds.manifest.dimensions.end()) {
                ds.manifest.dimensions.push_back(dim);
                ds.manifest.n_classes[dim] = 2;
            }
        }
        for (const auto& l : import_classes) {
            auto [dim, value] = parse_kv(l);
            const int cls = std::stoi(value);
            info.labels[dim] = LabelValue{static_cast<double>(cls), cls};
            if (std::find(ds.manifest.dimensions.begin(), ds.manifest.dimensions.end(), dim) ==
                ds.manifest.dimensions.end()) {
                ds.manifest.dimensions.push_back(dim);
            }
            ds.manifest.n_classes[dim] = std::max(ds.manifest.n_classes[dim], cls + 1);
        }
        SubjectInfo* subj = nullptr;
        for (std::size_t si = 0; si < ds.manifest.subjects.size(); ++si) {
            if (ds.manifest.subjects[si].id == import_subject) {
                subj = &ds.manifest.subjects[si];
                ds.trials[si].push_back(trial);
                break;
            }
        }
        if (!subj) {
            ds.manifest.subjects.push_back(SubjectInfo{import_subject, {}});
            ds.trials.emplace_back();
            ds.trials.back().push_back(trial);
            subj = &ds.manifest.subjects.back();
        }
        subj->trials.push_back(std::move(info));
        save_dataset(ds, opt.out);
        std::cout << (fresh ? "created" : "updated") << " store " << opt.out << " with trial "
                  << import_subject << "/" << import_trial << "\n";
        return 0;
    }
    if (*train) {
        Dataset ds = load_dataset(opt.manifest);
        auto segments = manifest_segments(ds, opt);
        if (!exclude_subject.empty()) {
            std::erase_if(segments,
                          [&](const EegSegment& s) { return s.subject == exclude_subject; });
        }
        TrainConfig tc = train_config(opt);
        auto result = fit(segments, tc);
        fs::create_directories(opt.out);
        CheckpointMeta meta;
        meta.seed = tc.seed;
        meta.epoch = result.history.best_epoch;
        meta.lambda_l1 = tc.lambda_l1;
        if (!result.history.epochs.empty()) {
            const auto& best =
                result.history.epochs[static_cast<std::size_t>(result.history.best_epoch - 1)];
            meta.loss_g = best.loss_g;
            meta.loss_d = best.loss_d;
            meta.mse_train = best.mse_train;
            meta.mse_val = best.mse_val;
        }
        save_checkpoint((fs::path(opt.out) / "checkpoint.efc").string(), result.gen,
                        result.disc ? &*result.disc : nullptr, meta);
        save_history_csv((fs::path(opt.out) / "history.csv").string(), result.history);
        std::cout << "best epoch " << result.history.best_epoch << " (validation MSE "
                  << result.history.best_val << "); checkpoint written to " << opt.out << "\n";
        return 0;
    }
    if (*extract) {
        Dataset ds = load_dataset(opt.manifest);
        auto features = extract_features(ds, opt, checkpoint_path);
        save_feature_store(opt.out, features);
        std::cout << "wrote " << features.size() << " feature rows to " << opt.out << "\n";
        return 0;
    }
    if (*decode) {
        Dataset ds = load_dataset(opt.manifest);
        FeatureStore store = load_feature_store(decode_features_dir);
        std::vector<std::int64_t> train_rows, test_rows;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(store.identity.size()); ++i) {
            (store.identity[static_cast<std::size_t>(i)].subject == decode_subject ? test_rows
                                                                                   : train_rows)
                .push_back(i);
        }
        if (test_rows.empty()) {
            throw DataError("decode: no feature rows for subject " + decode_subject);
        }
        // label lookup
        std::map<std::pair<std::string, std::string>, std::map<std::string, int>> labels;
        for (const auto& s : ds.manifest.subjects) {
            for (const auto& t : s.trials) {
                for (const auto& [dim, lv] : t.labels) labels[{s.id, t.id}][dim] = lv.cls;
            }
        }
        Eigen::MatrixXd test_x(test_rows.size(), store.x.cols());
        for (std::size_t i = 0; i < test_rows.size(); ++i) {
            test_x.row(static_cast<Eigen::Index>(i)) = store.x.row(test_rows[i]);
        }
        LabeledFeatures indexed;
        indexed.x.resize(train_rows.size(), store.x.cols());
        indexed.labels.resize(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            indexed.x.row(static_cast<Eigen::Index>(i)) = store.x.row(train_rows[i]);
            indexed.labels[i] = static_cast<int>(i);
        }
        LabeledFeatures sub = subsample_training(indexed, opt.eta, Rng::derive(opt.seed, 17));
        fs::create_directories(opt.out);
        std::ofstream pred_out(fs::path(opt.out) / "predictions.csv");
        pred_out << "subject,trial,segment,dimension,predicted,true\n";
        for (std::size_t d = 0; d < ds.manifest.dimensions.size(); ++d) {
            const auto& dim = ds.manifest.dimensions[d];
            LabeledFeatures train_set;
            train_set.x = sub.x;
            train_set.labels.resize(sub.labels.size());
            for (std::size_t i = 0; i < sub.labels.size(); ++i) {
                const auto& seg = store.identity[static_cast<std::size_t>(
                    train_rows[static_cast<std::size_t>(sub.labels[i])])];
                train_set.labels[i] = labels.at({seg.subject, seg.trial}).at(dim);
            }
            DecodeConfig dc;
            dc.kappa = opt.kappa;
            dc.eta = opt.eta;
            dc.latent = opt.latent;
            dc.n_classes = ds.manifest.n_classes.at(dim);
            dc.seed = Rng::derive(opt.seed, 23 + d);
            std::vector<int> pred;
            switch (parse_decoder(opt.decoder)) {
                case DecoderKind::hypergraph: {
                    if (!dump_dir.empty()) {
                        Eigen::MatrixXd joint(train_set.x.rows() + test_x.rows(), test_x.cols());
                        joint.topRows(train_set.x.rows()) = train_set.x;
                        joint.bottomRows(test_x.rows()) = test_x;
                        Hypergraph hg = knn_hyperedges(joint, dc.kappa);
                        Eigen::MatrixXd delta = hypergraph_laplacian(hg);
                        auto emb = spectral_embed(delta, dc.n_classes);
                        fs::create_directories(dump_dir);
                        save_tensor((fs::path(dump_dir) / (dim + "_incidence.eft")).string(),
                                    matrix_to_tensor(hg.incidence()));
                        save_tensor((fs::path(dump_dir) / (dim + "_weights.eft")).string(),
                                    Tensor({static_cast<std::int64_t>(hg.weights.size())},
                                           hg.weights));
                        save_tensor((fs::path(dump_dir) / (dim + "_laplacian.eft")).string(),
                                    matrix_to_tensor(delta));
                        save_tensor((fs::path(dump_dir) / (dim + "_embedding.eft")).string(),
                                    matrix_to_tensor(emb.vectors));
                    }
                    pred = decode_fold(train_set, test_x, dc).predictions;
                    break;
                }
                case DecoderKind::simple_graph:
                    pred = simple_graph_baseline(train_set, test_x, dc);
                    break;
                case DecoderKind::pca_kmeans:
                    pred = pca_kmeans_baseline(train_set, test_x, dc);
                    break;
            }
            for (std::size_t i = 0; i < test_rows.size(); ++i) {
                const auto& seg = store.identity[static_cast<std::size_t>(test_rows[i])];
                pred_out << seg.subject << ',' << seg.trial << ',' << seg.index << ',' << dim
                         << ',' << pred[i] << ','
                         << labels.at({seg.subject, seg.trial}).at(dim) << "\n";
            }
        }
        std::cout << "predictions written to " << (fs::path(opt.out) / "predictions.csv").string()
                  << "\n";
        return 0;
    }
    if (*evaluate) {
        Dataset ds = load_dataset(opt.manifest);
        EvalReport report = run_experiment(ds, eval_config(opt));
        fs::create_directories(opt.out);
        {
            std::ofstream out(fs::path(opt.out) / "report.csv");
            write_report_csv(out, report);
        }
        {
            std::ofstream out(fs::path(opt.out) / "report.json");
            write_report_json(out, report);
        }
        for (const auto& [dim, acc] : report.mean_p_acc) {
            std::cout << dim << ": mean P_acc " << acc << "%, mean P_f "
                      << report.mean_p_f.at(dim) << "%, mean NMI " << report.mean_nmi.at(dim)
                      << "\n";
        }
        std::cout << "report written to " << opt.out << "\n";
        return 0;
    }
    if (*sweep) {
        Dataset ds = load_dataset(opt.manifest);
        EvalConfig base = eval_config(opt);
        std::vector<SweepPoint> points;
        if (!kappa_grid.empty()) {
            std::vector<int> grid;
            for (double v : parse_grid(kappa_grid)) grid.push_back(static_cast<int>(v));
            auto pts = sweep_kappa(ds, base, grid);
            points.insert(points.end(), pts.begin(), pts.end());
        }
        if (!eta_grid.empty()) {
            auto pts = sweep_eta(ds, base, parse_grid(eta_grid));
            points.insert(points.end(), pts.begin(), pts.end());
        }
        if (!t_grid.empty()) {
            std::vector<std::int64_t> grid;
            for (double v : parse_grid(t_grid)) grid.push_back(static_cast<std::int64_t>(v));
            auto pts = sweep_input_size(ds, base, grid);
            points.insert(points.end(), pts.begin(), pts.end());
        }
        if (points.empty()) {
            throw ConfigError("sweep: provide --kappa-grid, --eta-grid or --t-grid");
        }
        fs::create_directories(opt.out);
        for (const auto& p : points) {
            std::ostringstream name;
            name << p.param << '_' << p.value << ".json";
            std::ofstream out(fs::path(opt.out) / name.str());
            write_report_json(out, p.report);
        }
        std::ofstream timing(fs::path(opt.out) / "timing.csv");
        write_sweep_timing_csv(timing, points);
        std::cout << points.size() << " sweep reports written to " << opt.out << "\n";
        return 0;
    }
    if (*report_cmd) {
        auto load_any = [](const std::string& path) {
            std::ifstream in(path);
            if (!in) throw DataError("cannot open report: " + path);
            if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
                return parse_report_json(in);
            }
            return parse_report_csv(in);
        };
        fs::create_directories(opt.out);
        if (report_table) {
            std::vector<std::pair<std::string, EvalReport>> runs;
            for (const auto& path : report_inputs) {
                runs.emplace_back(fs::path(path).stem().string(), load_any(path));
            }
            std::ofstream out(fs::path(opt.out) / "comparison.csv");
            write_comparison_table(out, runs);
            std::cout << "comparison table written to "
                      << (fs::path(opt.out) / "comparison.csv").string() << "\n";
            return 0;
        }
        for (const auto& path : report_inputs) {
            EvalReport report = load_any(path);
            const std::string stem = fs::path(path).stem().string();
            if (report_format == "json") {
                std::ofstream out(fs::path(opt.out) / (stem + ".json"));
                write_report_json(out, report);
            } else if (report_format == "csv") {
                std::ofstream out(fs::path(opt.out) / (stem + ".csv"));
                write_report_csv(out, report);
            } else {
                throw ConfigError("report: format must be csv or json");
            }
        }
        std::cout << report_inputs.size() << " report(s) written to " << opt.out << "\n";
        return 0;
    }
    return 0;
}

} // namespace
