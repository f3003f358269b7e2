#include "fusenet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "fusenet/optim.hpp"
#include "fusenet/ops.hpp"
#include "fusenet/rng.hpp"

namespace fusenet {

namespace {

constexpr std::uint64_t kEpochBase = 100;

struct ModelSnapshot {
    std::vector<Tensor> params;
    std::vector<std::vector<double>> buffers;
};

ModelSnapshot snapshot(Generator& g, Discriminator* d) {
    ModelSnapshot s;
    for (Tensor* t : g.parameters()) s.params.push_back(*t);
    for (auto& [name, b] : g.named_buffers()) s.buffers.push_back(*b);
    if (d) {
        for (Tensor* t : d->parameters()) s.params.push_back(*t);
        for (auto& [name, b] : d->named_buffers()) s.buffers.push_back(*b);
    }
    return s;
}

void restore(const ModelSnapshot& s, Generator& g, Discriminator* d) {
    std::size_t pi = 0, bi = 0;
    for (Tensor* t : g.parameters()) *t = s.params[pi++];
    for (auto& [name, b] : g.named_buffers()) *b = s.buffers[bi++];
    if (d) {
        for (Tensor* t : d->parameters()) *t = s.params[pi++];
        for (auto& [name, b] : d->named_buffers()) *b = s.buffers[bi++];
    }
}

} // namespace

void TrainConfig::validate() const {
    if (lr_generator <= 0 || lr_discriminator <= 0) {
        throw ConfigError("train: learning rates must be positive");
    }
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (!(validation_fraction > 0.0) || !(validation_fraction < 1.0)) {
        throw ConfigError("train: validation_fraction must be in (0,1)");
    }
    if (lambda_l1 < 0) throw ConfigError("train: lambda must be >= 0");
}

void write_history_csv(std::ostream& out, const TrainHistory& h) {
    out << "epoch,loss_g,loss_d,mse_train,mse_val,seconds\n";
    for (const auto& e : h.epochs) {
        out << e.epoch << ',' << e.loss_g << ',' << e.loss_d << ',' << e.mse_train << ','
            << e.mse_val << ',' << e.seconds << '\n';
    }
}

void save_history_csv(const std::string& path, const TrainHistory& h) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write history: " + path);
    write_history_csv(out, h);
}

Tensor mse_loss(const Tensor& x, const Tensor& y) {
    if (x.shape() != y.shape()) {
        throw DimensionError("mse_loss: shape mismatch (" + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()) + " elements)");
    }
    Tensor d = sub(x, y);
    return mean(mul(d, d));
}

GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake, const Tensor& x,
                     const Tensor& gx, double lambda_l1) {
    for (const Tensor* p : {&d_real, &d_fake}) {
        for (std::int64_t i = 0; i < p->size(); ++i) {
            const double v = (*p)[i];
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ContractError("gan_losses: probability " + std::to_string(v) +
                                    " outside [0,1]");
            }
        }
    }
    constexpr double kEps = 1e-7;
    Tensor real = clamp(d_real, kEps, 1.0 - kEps);
    Tensor fake = clamp(d_fake, kEps, 1.0 - kEps);
    Tensor one_minus_fake = add_scalar(scale(fake, -1.0), 1.0);
    GanLosses out;
    out.loss_d = scale(add(mean(log_values(real)), mean(log_values(one_minus_fake))), -1.0);
    out.loss_g = scale(mean(log_values(fake)), -1.0);
    if (lambda_l1 != 0.0) {
        out.loss_g = add(out.loss_g, scale(mse_loss(x, gx), lambda_l1));
    }
    return out;
}

std::pair<std::vector<EegSegment>, std::vector<EegSegment>> split_validation(
    const std::vector<EegSegment>& segments, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || !(fraction < 1.0)) {
        throw ContractError("split_validation: fraction must be in (0,1)");
    }
    std::vector<std::pair<std::string, std::string>> trials;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& s : segments) {
        auto key = std::make_pair(s.subject, s.trial);
        if (seen.insert(key).second) trials.push_back(key);
    }
    if (trials.size() < 2) {
        throw ContractError("split_validation: need at least 2 trials, got " +
                            std::to_string(trials.size()));
    }
    std::sort(trials.begin(), trials.end());
    Rng rng(seed);
    rng.shuffle(trials);
    auto n_val = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(trials.size())));
    n_val = std::min(std::max<std::size_t>(n_val, 1), trials.size() - 1);
    std::set<std::pair<std::string, std::string>> val_keys(trials.begin(),
                                                           trials.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<EegSegment> train, val;
    for (const auto& s : segments) {
        if (val_keys.count({s.subject, s.trial})) {
            val.push_back(s);
        } else {
            train.push_back(s);
        }
    }
    return {std::move(train), std::move(val)};
}

std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, std::int64_t epoch) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(Rng::derive(seed, kEpochBase + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(idx);
    return idx;
}

Tensor make_batch(const std::vector<EegSegment>& segments,
                  const std::vector<std::int64_t>& indices, DType dtype) {
    if (indices.empty()) throw ContractError("make_batch: empty index set");
    const Tensor& first = segments[static_cast<std::size_t>(indices[0])].samples;
    const std::int64_t c = first.extent(0), t = first.extent(1);
    const auto b = static_cast<std::int64_t>(indices.size());
    std::vector<double> vals(static_cast<std::size_t>(b * c * t));
    for (std::int64_t i = 0; i < b; ++i) {
        const Tensor& seg = segments[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])].samples;
        if (seg.extent(0) != c || seg.extent(1) != t) {
            throw DimensionError("make_batch: segment extents differ across the dataset");
        }
        const auto& sv = seg.values();
        std::copy(sv.begin(), sv.end(), vals.begin() + static_cast<std::ptrdiff_t>(i * c * t));
    }
    return Tensor({b, 1, c, t}, std::move(vals), dtype);
}

double eval_mse(Generator& gen, const std::vector<EegSegment>& segments, DType dtype) {
    if (segments.empty()) throw ContractError("eval_mse: empty segment set");
    constexpr std::int64_t kChunk = 128;
    double sq_sum = 0.0;
    std::int64_t elems = 0;
    const auto n = static_cast<std::int64_t>(segments.size());
    for (std::int64_t start = 0; start < n; start += kChunk) {
        std::vector<std::int64_t> idx;
        for (std::int64_t i = start; i < std::min(start + kChunk, n); ++i) idx.push_back(i);
        Tensor x = make_batch(segments, idx, dtype);
        Tensor y = gen.autoencode(x, BnMode::eval).first;
        const auto& xv = x.values();
        const auto& yv = y.values();
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const double d = xv[i] - yv[i];
            sq_sum += d * d;
        }
        elems += x.size();
    }
    return sq_sum / static_cast<double>(elems);
}

FitResult fit(const std::vector<EegSegment>& dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) throw ContractError("fit: empty dataset");
    const std::int64_t c = dataset.front().samples.extent(0);
    const std::int64_t t = dataset.front().samples.extent(1);
    for (const auto& s : dataset) {
        if (s.samples.rank() != 2 || s.samples.extent(0) != c || s.samples.extent(1) != t) {
            throw DimensionError("fit: segments do not share a common CxT shape");
        }
    }

    GeneratorSpec spec;
    spec.variant = config.variant;
    spec.channels = c;
    spec.timepoints = t;
    spec.base_filters = config.base_filters;
    spec.depth_multiplier = config.depth_multiplier;
    spec.gru_hidden = config.gru_hidden;
    spec.latent = config.latent;
    spec.dtype = config.precision;

    Generator gen = Generator::build(spec, Rng::derive(config.seed, train_streams::generator));
    std::optional<Discriminator> disc;
    const bool gan = variant_has_gan(config.variant);
    if (gan) {
        disc = Discriminator::build(c, t, config.base_filters, config.depth_multiplier,
                                    Rng::derive(config.seed, train_streams::discriminator), config.precision);
    }
    AdamState adam_g, adam_d;

    auto [train_set, val_set] =
        split_validation(dataset, config.validation_fraction, Rng::derive(config.seed, train_streams::split));
    const auto n_train = static_cast<std::int64_t>(train_set.size());

    TrainHistory history;
    history.best_val = std::numeric_limits<double>::infinity();
    ModelSnapshot best;

    for (std::int64_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto order = epoch_order(n_train, config.seed, epoch);
        double sum_loss_g = 0.0, sum_loss_d = 0.0, sum_sq = 0.0;
        std::int64_t n_batches = 0, n_elems = 0;
        for (std::int64_t start = 0; start < n_train; start += config.batch_size) {
            const std::int64_t stop = std::min(start + config.batch_size, n_train);
            std::vector<std::int64_t> idx(order.begin() + start, order.begin() + stop);
            try {
                Tensor x = make_batch(train_set, idx, config.precision);
                Tape tape_g;
                auto [y, o] = gen.autoencode(x, BnMode::train, &tape_g);
                Tensor loss_g;
                double batch_mse = 0.0;
                if (gan) {
                    // discriminator step on the current generator's output
                    {
                        Tape tape_d;
                        Tensor d_real = disc->forward(x, BnMode::train, &tape_d);
                        Tensor d_fake = disc->forward(y.detach(), BnMode::train, &tape_d);
                        GanLosses gl = gan_losses(d_real, d_fake, x, y.detach(), 0.0);
                        sum_loss_d += gl.loss_d.item();
                        tape_d.backward(gl.loss_d);
                        auto dp = disc->parameters();
                        std::vector<Tensor> grads;
                        grads.reserve(dp.size());
                        for (Tensor* p : dp) grads.push_back(tape_d.grad(*p));
                        adam_step(dp, grads, adam_d, config.lr_discriminator);
                    }
                    // generator step against the updated discriminator
                    Tensor d_fake = disc->forward(y, BnMode::train, nullptr);
                    Tensor fake = clamp(d_fake, 1e-7, 1.0 - 1e-7);
                    Tensor rec = mse_loss(x, y);
                    batch_mse = rec.item();
                    loss_g = add(scale(mean(log_values(fake)), -1.0),
                                 scale(rec, config.lambda_l1));
                } else {
                    loss_g = mse_loss(x, y);
                    batch_mse = loss_g.item();
                }
                sum_loss_g += loss_g.item();
                sum_sq += batch_mse * static_cast<double>(x.size());
                n_elems += x.size();
                ++n_batches;
                tape_g.backward(loss_g);
                auto gp = gen.parameters();
                std::vector<Tensor> grads;
                grads.reserve(gp.size());
                for (Tensor* p : gp) grads.push_back(tape_g.grad(*p));
                adam_step(gp, grads, adam_g, config.lr_generator);
            } catch (const NumericError& e) {
                throw DivergenceError("fit: non-finite value at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(n_batches) + ": " + e.what());
            }
        }
        double mse_val = 0.0;
        try {
            mse_val = eval_mse(gen, val_set, config.precision);
        } catch (const NumericError& e) {
            throw DivergenceError("fit: non-finite value at epoch " + std::to_string(epoch) +
                                  " during validation: " + e.what());
        }
        const auto t1 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_g = sum_loss_g / static_cast<double>(std::max<std::int64_t>(1, n_batches));
        rec.loss_d = gan ? sum_loss_d / static_cast<double>(std::max<std::int64_t>(1, n_batches))
                         : 0.0;
        rec.mse_train = sum_sq / static_cast<double>(std::max<std::int64_t>(1, n_elems));
        rec.mse_val = mse_val;
        rec.seconds = std::chrono::duration<double>(t1 - t0).count();
        history.epochs.push_back(rec);
        if (mse_val < history.best_val) {
            history.best_val = mse_val;
            history.best_epoch = epoch;
            best = snapshot(gen, gan ? &*disc : nullptr);
        }
    }
    if (history.best_epoch > 0) {
        restore(best, gen, gan ? &*disc : nullptr);
    }
    return FitResult(std::move(gen), std::move(disc), std::move(history));
}

} // namespace fusenet
