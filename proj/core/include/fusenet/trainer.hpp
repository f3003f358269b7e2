#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fusenet/data.hpp"
#include "fusenet/model.hpp"

namespace fusenet {

struct TrainConfig {
    Variant variant = Variant::cnn_rnn_gan;
    double lr_generator = 0.001;
    double lr_discriminator = 0.0002;
    std::int64_t batch_size = 128;
    std::int64_t max_epochs = 100;
    double lambda_l1 = 10.0;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    // architecture
    std::int64_t base_filters = 16;
    std::int64_t depth_multiplier = 2;
    std::int64_t gru_hidden = 32;
    std::int64_t latent = 64;
    DType precision = DType::f32;

    void validate() const;
};

struct EpochRecord {
    std::int64_t epoch = 0;
    double loss_g = 0.0;
    double loss_d = 0.0;
    double mse_train = 0.0;
    double mse_val = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::int64_t best_epoch = -1;
    double best_val = 0.0;
};

/// CSV columns: epoch,loss_g,loss_d,mse_train,mse_val,seconds
void write_history_csv(std::ostream& out, const TrainHistory& h);
void save_history_csv(const std::string& path, const TrainHistory& h);

/// Mean of squared elementwise differences; differentiable in both arguments.
Tensor mse_loss(const Tensor& x, const Tensor& y);

struct GanLosses {
    Tensor loss_d; // -[mean log d_real + mean log(1 - d_fake)]
    Tensor loss_g; // -mean log d_fake + lambda * mse(x, gx)
};

/// Probabilities are validated to lie in [0,1] and clamped 1e-7 away from the
/// boundaries before the logs. The generator term is the non-saturating form.
GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake, const Tensor& x,
                     const Tensor& gx, double lambda_l1);

/// Trial-granular validation split: no trial straddles the two sides.
/// Deterministic per seed; needs at least two distinct trials.
std::pair<std::vector<EegSegment>, std::vector<EegSegment>> split_validation(
    const std::vector<EegSegment>& segments, double fraction, std::uint64_t seed);

/// Seed streams derived from TrainConfig::seed. Public so a training run can
/// be replayed step for step outside fit().
namespace train_streams {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t generator = 2;
inline constexpr std::uint64_t discriminator = 3;
} // namespace train_streams

/// Epoch-e presentation order of n training segments (exposed so full-batch
/// equivalence can be replayed step for step in tests).
std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, std::int64_t epoch);

struct FitResult {
    Generator gen;
    std::optional<Discriminator> disc;
    TrainHistory history;

    FitResult(Generator g, std::optional<Discriminator> d, TrainHistory h)
        : gen(std::move(g)), disc(std::move(d)), history(std::move(h)) {}
};

/// Unsupervised training. Plain variants descend the reconstruction MSE; GAN
/// variants alternate one discriminator and one generator update per batch.
/// Returns the parameters of the epoch with the lowest validation MSE.
FitResult fit(const std::vector<EegSegment>& dataset, const TrainConfig& config);

/// Stack segments into one [B,1,C,T] batch (order as given).
Tensor make_batch(const std::vector<EegSegment>& segments,
                  const std::vector<std::int64_t>& indices, DType dtype);

/// Reconstruction MSE of a model over a segment set, eval mode, batched.
double eval_mse(Generator& gen, const std::vector<EegSegment>& segments, DType dtype);

} // namespace fusenet
