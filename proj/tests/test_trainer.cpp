#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "fusenet/optim.hpp"
#include "fusenet/ops.hpp"
#include "fusenet/rng.hpp"
#include "fusenet/trainer.hpp"

using namespace fusenet;

namespace {

std::vector<EegSegment> overfit_fixture(std::int64_t channels, std::int64_t timepoints,
                                        std::int64_t trials, std::int64_t per_trial,
                                        std::uint64_t seed) {
    SynthSpec spec;
    spec.subjects = 1;
    spec.trials = trials;
    spec.segments = per_trial;
    spec.channels = channels;
    spec.rate = static_cast<double>(timepoints);
    spec.classes = 2;
    spec.seed = seed;
    return synth_dataset(spec).cut_segments();
}

} // namespace

TEST_CASE("mse_loss: zero at equality, worked example, symmetry") {
    Tensor x({2}, {1.0, 2.0});
    Tensor y({2}, {1.0, 4.0});
    CHECK(mse_loss(x, x).item() == 0.0);
    CHECK(mse_loss(x, y).item() == 2.0);
    CHECK(mse_loss(x, y).item() == mse_loss(y, x).item());
    CHECK_THROWS_AS(mse_loss(x, Tensor({3}, {1, 2, 3})), DimensionError);
}

TEST_CASE("gan_losses: worked values, lambda=0 degeneracy, range contract") {
    Tensor half = Tensor::scalar(0.5);
    Tensor x({2}, {0.0, 0.0});
    Tensor gx({2}, {1.0, 1.0});
    auto gl = gan_losses(half, half, x, gx, 0.0);
    CHECK(gl.loss_d.item() == doctest::Approx(1.3862943611198906).epsilon(1e-12));

    auto gl2 = gan_losses(Tensor::scalar(0.9), Tensor::scalar(0.1), x, gx, 0.0);
    CHECK(gl2.loss_d.item() == doctest::Approx(0.21072103131565253).epsilon(1e-10));

    // lambda = 0: the generator objective ignores the reconstruction pair
    Tensor gx2({2}, {100.0, -3.0});
    auto a = gan_losses(half, Tensor::scalar(0.3), x, gx, 0.0);
    auto b = gan_losses(half, Tensor::scalar(0.3), x, gx2, 0.0);
    CHECK(a.loss_g.item() == b.loss_g.item());

    // lambda couples the reconstruction term with the stated weight
    auto c = gan_losses(half, Tensor::scalar(0.3), x, gx, 10.0);
    CHECK(c.loss_g.item() == doctest::Approx(a.loss_g.item() + 10.0 * 1.0).epsilon(1e-12));

    CHECK_THROWS_AS(gan_losses(Tensor::scalar(1.5), half, x, gx, 0.0), ContractError);
    CHECK_THROWS_AS(gan_losses(half, Tensor::scalar(-0.1), x, gx, 0.0), ContractError);

    // boundary probabilities survive via clamping instead of producing inf
    auto d = gan_losses(Tensor::scalar(1.0), Tensor::scalar(0.0), x, gx, 0.0);
    CHECK(std::isfinite(d.loss_d.item()));
}

TEST_CASE("split_validation: trial granularity, determinism, contracts") {
    std::vector<EegSegment> segs;
    for (int t = 0; t < 10; ++t) {
        for (int k = 0; k < 3; ++k) {
            EegSegment s;
            s.subject = "s01";
            s.trial = "t" + std::to_string(t);
            s.index = k;
            s.samples = Tensor::zeros({2, 8});
            segs.push_back(s);
        }
    }
    auto [train, val] = split_validation(segs, 0.2, 5);
    CHECK(train.size() + val.size() == segs.size());
    CHECK(val.size() == 6); // 2 of 10 trials
    // no trial straddles the split
    std::set<std::string> val_trials, train_trials;
    for (const auto& s : val) val_trials.insert(s.trial);
    for (const auto& s : train) train_trials.insert(s.trial);
    for (const auto& t : val_trials) CHECK(train_trials.count(t) == 0);

    auto [train2, val2] = split_validation(segs, 0.2, 5);
    CHECK(val2.size() == val.size());
    for (std::size_t i = 0; i < val.size(); ++i) {
        CHECK(val2[i].trial == val[i].trial);
        CHECK(val2[i].index == val[i].index);
    }

    std::vector<EegSegment> one_trial(segs.begin(), segs.begin() + 3);
    CHECK_THROWS_AS(split_validation(one_trial, 0.2, 5), ContractError);
    CHECK_THROWS_AS(split_validation(segs, 0.0, 5), ContractError);
}

TEST_CASE("fit: config defaults match the training schedule") {
    TrainConfig cfg;
    CHECK(cfg.lr_generator == 0.001);
    CHECK(cfg.lr_discriminator == 0.0002);
    CHECK(cfg.batch_size == 128);
    CHECK(cfg.max_epochs == 100);
    CHECK_NOTHROW(cfg.validate());
    cfg.validation_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("fit: cnn variant overfits a tiny fixture" * doctest::timeout(240)) {
    auto segs = overfit_fixture(8, 64, 4, 2, 11);
    REQUIRE(segs.size() == 8);
    TrainConfig cfg;
    cfg.variant = Variant::cnn;
    cfg.max_epochs = 200;
    cfg.batch_size = 8;
    cfg.base_filters = 8;
    cfg.depth_multiplier = 2;
    cfg.latent = 64;
    cfg.validation_fraction = 0.25;
    cfg.seed = 3;
    auto result = fit(segs, cfg);
    const auto& hist = result.history.epochs;
    REQUIRE(hist.size() == 200);
    CHECK(hist.back().mse_train < 0.05 * hist.front().mse_train);

    // training MSE decreases almost monotonically: at most one increase in
    // any window of ten consecutive epochs
    for (std::size_t start = 0; start + 10 <= hist.size(); start += 10) {
        int violations = 0;
        for (std::size_t i = start + 1; i < start + 10; ++i) {
            if (hist[i].mse_train > hist[i - 1].mse_train) ++violations;
        }
        CHECK(violations <= 1);
    }

    // early stopping: re-evaluating the returned model on the validation
    // split reproduces the recorded minimum
    auto [train, val] =
        split_validation(segs, cfg.validation_fraction, Rng::derive(cfg.seed, train_streams::split));
    const double re = eval_mse(result.gen, val, cfg.precision);
    CHECK(std::abs(re - result.history.best_val) < 1e-6);
}

TEST_CASE("fit: identical seeds give bit-identical histories" * doctest::timeout(120)) {
    auto segs = overfit_fixture(4, 32, 4, 2, 21);
    TrainConfig cfg;
    cfg.variant = Variant::cnn_rnn_gan;
    cfg.max_epochs = 5;
    cfg.batch_size = 4;
    cfg.base_filters = 2;
    cfg.depth_multiplier = 2;
    cfg.gru_hidden = 4;
    cfg.latent = 8;
    cfg.validation_fraction = 0.25;
    cfg.seed = 9;
    auto r1 = fit(segs, cfg);
    auto r2 = fit(segs, cfg);
    REQUIRE(r1.history.epochs.size() == r2.history.epochs.size());
    for (std::size_t i = 0; i < r1.history.epochs.size(); ++i) {
        CHECK(r1.history.epochs[i].loss_g == r2.history.epochs[i].loss_g);
        CHECK(r1.history.epochs[i].loss_d == r2.history.epochs[i].loss_d);
        CHECK(r1.history.epochs[i].mse_train == r2.history.epochs[i].mse_train);
        CHECK(r1.history.epochs[i].mse_val == r2.history.epochs[i].mse_val);
    }
    auto p1 = r1.gen.parameters();
    auto p2 = r2.gen.parameters();
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i]->values() == p2[i]->values());
    }
}

TEST_CASE("fit with batch_size >= n equals a hand-rolled full-batch loop" *
          doctest::timeout(120)) {
    auto segs = overfit_fixture(4, 32, 4, 2, 33);
    TrainConfig cfg;
    cfg.variant = Variant::cnn;
    cfg.max_epochs = 4;
    cfg.batch_size = 64; // larger than the train split
    cfg.base_filters = 2;
    cfg.depth_multiplier = 1;
    cfg.latent = 8;
    cfg.validation_fraction = 0.25;
    cfg.seed = 17;
    cfg.precision = DType::f64;
    auto result = fit(segs, cfg);

    // replay: same split, same init, same order, plain full-batch descent
    auto [train, val] =
        split_validation(segs, cfg.validation_fraction, Rng::derive(cfg.seed, train_streams::split));
    GeneratorSpec spec;
    spec.variant = cfg.variant;
    spec.channels = 4;
    spec.timepoints = 32;
    spec.base_filters = cfg.base_filters;
    spec.depth_multiplier = cfg.depth_multiplier;
    spec.latent = cfg.latent;
    spec.dtype = cfg.precision;
    Generator gen = Generator::build(spec, Rng::derive(cfg.seed, train_streams::generator));
    AdamState adam;
    // snapshot the replayed parameters after every epoch; fit returns the
    // best-validation epoch's weights
    std::vector<std::vector<std::vector<double>>> per_epoch;
    for (std::int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto order = epoch_order(static_cast<std::int64_t>(train.size()), cfg.seed, epoch);
        Tensor x = make_batch(train, order, cfg.precision);
        Tape tape;
        auto [y, o] = gen.autoencode(x, BnMode::train, &tape);
        Tensor loss = mse_loss(x, y);
        tape.backward(loss);
        auto params = gen.parameters();
        std::vector<Tensor> grads;
        for (Tensor* p : params) grads.push_back(tape.grad(*p));
        adam_step(params, grads, adam, cfg.lr_generator);
        std::vector<std::vector<double>> snap;
        for (Tensor* p : gen.parameters()) snap.push_back(p->values());
        per_epoch.push_back(std::move(snap));
    }
    REQUIRE(result.history.best_epoch >= 1);
    const auto& want = per_epoch[static_cast<std::size_t>(result.history.best_epoch - 1)];
    auto got = result.gen.parameters();
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i]->values() == want[i]);
    }
}

TEST_CASE("fit: adversarial variant stays finite and improves reconstruction" *
          doctest::timeout(240)) {
    auto segs = overfit_fixture(8, 64, 4, 2, 5);
    TrainConfig cfg;
    cfg.variant = Variant::cnn_rnn_gan;
    cfg.max_epochs = 20;
    cfg.batch_size = 8;
    cfg.base_filters = 4;
    cfg.depth_multiplier = 2;
    cfg.gru_hidden = 8;
    cfg.latent = 16;
    cfg.validation_fraction = 0.25;
    cfg.seed = 2;
    auto result = fit(segs, cfg);
    for (const auto& e : result.history.epochs) {
        CHECK(std::isfinite(e.loss_g));
        CHECK(std::isfinite(e.loss_d));
        CHECK(std::isfinite(e.mse_val));
    }
    CHECK(result.disc.has_value());
    CHECK(result.history.epochs.back().mse_train < result.history.epochs.front().mse_train);
}

TEST_CASE("fit: contracts and divergence trap") {
    TrainConfig cfg;
    CHECK_THROWS_AS(fit({}, cfg), ContractError);

    auto segs = overfit_fixture(4, 32, 4, 2, 8);
    cfg.variant = Variant::cnn;
    cfg.max_epochs = 3;
    cfg.batch_size = 8;
    cfg.base_filters = 2;
    cfg.depth_multiplier = 1;
    cfg.latent = 8;
    cfg.validation_fraction = 0.25;
    cfg.precision = DType::f32;
    cfg.lr_generator = 1e30; // drives the f32 weights to overflow
    CHECK_THROWS_WITH_AS(fit(segs, cfg), doctest::Contains("epoch"), DivergenceError);
}

TEST_CASE("history CSV has the fixed column order") {
    TrainHistory h;
    h.epochs.push_back(EpochRecord{1, 0.5, 0.25, 0.1, 0.2, 1.5});
    std::ostringstream out;
    write_history_csv(out, h);
    CHECK(out.str() == "epoch,loss_g,loss_d,mse_train,mse_val,seconds\n1,0.5,0.25,0.1,0.2,1.5\n");
}
