#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fusenet/ops.hpp"
#include "fusenet/tensor.hpp"

namespace fusenet {

enum class Variant { cnn, cnn_gan, cnn_rnn, cnn_rnn_gan };

bool variant_has_gan(Variant v);
bool variant_has_rnn(Variant v);
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

/// Architecture of the generator (encoder-decoder). The encoder is a compact
/// 4-conv stack: temporal filters of length T/2, a depthwise spatial conv
/// over all channels, then a depthwise-separable temporal conv, with 1x4 and
/// 1x8 average pooling. Recurrent variants fuse the pooled sequence with a
/// bidirectional GRU; plain variants use a flatten+affine bottleneck.
struct GeneratorSpec {
    Variant variant = Variant::cnn_rnn_gan;
    std::int64_t channels = 32;      // electrode rows C
    std::int64_t timepoints = 384;   // samples per segment T
    std::int64_t base_filters = 16;  // temporal filter count F1
    std::int64_t depth_multiplier = 2;
    std::int64_t gru_hidden = 32;
    std::int64_t latent = 64;        // fused feature length
    DType dtype = DType::f64;

    std::int64_t fused_filters() const { return base_filters * depth_multiplier; }
    std::int64_t bottleneck_steps() const { return timepoints / 32; }
    std::int64_t decoder_hidden() const { return 2 * latent; }

    /// Throws ConfigError naming the failing stage if the stack cannot be
    /// assembled for these extents.
    void validate() const;
};

/// Learned parameters of one GRU cell; weight layout is [input, hidden] /
/// [hidden, hidden] so that activations multiply from the left.
struct GruCellParams {
    Tensor wz, wr, wh;
    Tensor uz, ur, uh;
    Tensor bz, br, bh;

    static GruCellParams init(std::int64_t input, std::int64_t hidden, std::uint64_t seed,
                              DType dtype);
    std::int64_t input_size() const { return wz.extent(0); }
    std::int64_t hidden_size() const { return wz.extent(1); }
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor*>>& out);
    GruCellParams watched(Tape& tape) const;
};

/// One step of the gated recurrent unit:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   hh = tanh(Wh x + Uh (r*h) + bh)
///   h' = (1-z)*h + z*hh
/// x_t is [N,input], h_prev is [N,hidden].
Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, const GruCellParams& params);

/// Bidirectional GRU over a nonempty sequence of [N,input] steps; returns one
/// [N, 2*hidden] output per step (forward state, then backward state).
std::vector<Tensor> bigru(const std::vector<Tensor>& sequence, const GruCellParams& fwd,
                          const GruCellParams& bwd);

/// Fused feature of one segment with its origin.
struct LatentFeature {
    std::vector<double> values;
    std::string subject;
    std::string trial;
    std::int64_t segment = -1;
};

class Generator {
public:
    static Generator build(const GeneratorSpec& spec, std::uint64_t seed);

    const GeneratorSpec& spec() const { return spec_; }

    /// Conv encoder: [N,1,C,T] -> [N,F2,1,steps]. Train mode updates BN
    /// running stats; pass a tape to watch parameters for a gradient step.
    Tensor encode_map(const Tensor& x, BnMode mode, Tape* watch = nullptr);
    /// Full encoder: [N,1,C,T] -> fused features [N,latent].
    Tensor encode_batch(const Tensor& x, BnMode mode, Tape* watch = nullptr);
    /// Decoder: [N,latent] -> [N,1,C,T].
    Tensor decode_batch(const Tensor& o, BnMode mode, Tape* watch = nullptr);
    /// (reconstruction, fused features) in one pass.
    std::pair<Tensor, Tensor> autoencode(const Tensor& x, BnMode mode, Tape* watch = nullptr);

    /// One segment [C,T] -> latent vector, eval mode.
    std::vector<double> encode_one(const Tensor& x_ct);
    /// One latent vector -> reconstruction [C,T], eval mode.
    Tensor decode_one(const std::vector<double>& latent);

    std::vector<std::pair<std::string, Tensor*>> named_parameters();
    std::vector<Tensor*> parameters();
    std::int64_t parameter_count() const;

    /// BN running-stat buffers, named (serialized with checkpoints, restored
    /// with best-epoch weights).
    std::vector<std::pair<std::string, std::vector<double>*>> named_buffers();

private:
    Generator() = default;

    GeneratorSpec spec_;

    Tensor enc_k1_;
    Tensor enc_g1_, enc_b1_;
    BatchNormState enc_bn1_;
    Tensor enc_k2_;
    Tensor enc_g2_, enc_b2_;
    BatchNormState enc_bn2_;
    Tensor enc_k3_, enc_k4_;
    Tensor enc_g3_, enc_b3_;
    BatchNormState enc_bn3_;

    GruCellParams rnn_fwd_, rnn_bwd_;    // recurrent variants
    Tensor enc_proj_w_, enc_proj_b_;     // plain variants

    Tensor dec_h0_w_, dec_h0_b_;
    GruCellParams dec_gru_;
    Tensor dec_out_w_, dec_out_b_;
    Tensor dec_proj_w_, dec_proj_b_;

    Tensor dec_k1_;
    Tensor dec_g1_, dec_b1_;
    BatchNormState dec_bn1_;
    Tensor dec_k2_;
    Tensor dec_g2_, dec_b2_;
    BatchNormState dec_bn2_;
    Tensor dec_k3_;
    Tensor dec_g3_, dec_b3_;
    BatchNormState dec_bn3_;
    Tensor dec_k4_;
};

/// Conv stack shaped like the encoder plus a global-average-pool head ending
/// in one sigmoid unit. Independent of the generator variant.
class Discriminator {
public:
    static Discriminator build(std::int64_t channels, std::int64_t timepoints,
                               std::int64_t base_filters, std::int64_t depth_multiplier,
                               std::uint64_t seed, DType dtype);

    /// [N,1,C,T] -> probabilities [N,1] in (0,1).
    Tensor forward(const Tensor& x, BnMode mode, Tape* watch = nullptr);
    /// One segment [C,T] -> probability, eval mode.
    double discriminate(const Tensor& x_ct);

    std::vector<std::pair<std::string, Tensor*>> named_parameters();
    std::vector<Tensor*> parameters();
    std::int64_t parameter_count() const;
    std::vector<std::pair<std::string, std::vector<double>*>> named_buffers();

    std::int64_t channels() const { return channels_; }
    std::int64_t timepoints() const { return timepoints_; }
    std::int64_t base_filters() const { return base_filters_; }
    std::int64_t depth_multiplier() const { return depth_multiplier_; }

private:
    Discriminator() = default;

    std::int64_t channels_ = 0, timepoints_ = 0, base_filters_ = 0, depth_multiplier_ = 0;

    Tensor k1_;
    Tensor g1_, b1_;
    BatchNormState bn1_;
    Tensor k2_;
    Tensor g2_, b2_;
    BatchNormState bn2_;
    Tensor k3_, k4_;
    Tensor g3_, b3_;
    BatchNormState bn3_;
    Tensor head_w_, head_b_;
};

// --- checkpoints ---------------------------------------------------------------
// Container layout: magic "EFC1", u64 little-endian JSON length, a JSON
// manifest (spec fields, seed, epoch, losses, tensor names in order), then
// each named tensor in the tensor serialization format.

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::int64_t epoch = -1;
    double loss_g = 0.0;
    double loss_d = 0.0;
    double mse_train = 0.0;
    double mse_val = 0.0;
    double lambda_l1 = 0.0;
};

void save_checkpoint(const std::string& path, Generator& gen, Discriminator* disc,
                     const CheckpointMeta& meta);

struct Checkpoint {
    Generator gen;
    std::optional<Discriminator> disc;
    CheckpointMeta meta;

    Checkpoint(Generator g, std::optional<Discriminator> d, CheckpointMeta m)
        : gen(std::move(g)), disc(std::move(d)), meta(m) {}
};

Checkpoint load_checkpoint(const std::string& path);

} // namespace fusenet
