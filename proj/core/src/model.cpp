#include "fusenet/model.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "fusenet/rng.hpp"

namespace fusenet {

bool variant_has_gan(Variant v) { return v == Variant::cnn_gan || v == Variant::cnn_rnn_gan; }
bool variant_has_rnn(Variant v) { return v == Variant::cnn_rnn || v == Variant::cnn_rnn_gan; }

std::string to_string(Variant v) {
    switch (v) {
        case Variant::cnn: return "cnn";
        case Variant::cnn_gan: return "cnn-gan";
        case Variant::cnn_rnn: return "cnn-rnn";
        case Variant::cnn_rnn_gan: return "cnn-rnn-gan";
    }
    return "cnn";
}

Variant parse_variant(const std::string& name) {
    if (name == "cnn") return Variant::cnn;
    if (name == "cnn-gan" || name == "cnn_gan") return Variant::cnn_gan;
    if (name == "cnn-rnn" || name == "cnn_rnn") return Variant::cnn_rnn;
    if (name == "cnn-rnn-gan" || name == "cnn_rnn_gan") return Variant::cnn_rnn_gan;
    throw ConfigError("unknown variant '" + name +
                      "' (expected cnn, cnn-gan, cnn-rnn or cnn-rnn-gan)");
}

void GeneratorSpec::validate() const {
    if (channels < 1) throw ConfigError("generator: channels must be >= 1");
    if (base_filters < 1 || depth_multiplier < 1) {
        throw ConfigError("generator: filter counts must be >= 1");
    }
    if (latent < 1) throw ConfigError("generator: latent size must be >= 1");
    if (timepoints < 2 || timepoints % 2 != 0) {
        throw ConfigError("generator temporal-conv stage: timepoints " +
                          std::to_string(timepoints) + " must be even for a T/2 filter");
    }
    if (timepoints % 4 != 0) {
        throw ConfigError("generator pool1 stage: timepoints " + std::to_string(timepoints) +
                          " not divisible by 4");
    }
    if ((timepoints / 4) % 8 != 0) {
        throw ConfigError("generator pool2 stage: pooled length " +
                          std::to_string(timepoints / 4) + " not divisible by 8");
    }
    if (timepoints / 4 - 2 < 0) {
        throw ConfigError("generator decoder stage: timepoints too short for the T/2 filter");
    }
    if (variant_has_rnn(variant)) {
        if (gru_hidden < 1) throw ConfigError("generator: gru_hidden must be >= 1");
        if (latent != 2 * gru_hidden) {
            throw ConfigError("generator: latent " + std::to_string(latent) +
                              " must equal 2*gru_hidden (" + std::to_string(2 * gru_hidden) +
                              ") for recurrent variants");
        }
    }
}

// --- GRU -----------------------------------------------------------------------

GruCellParams GruCellParams::init(std::int64_t input, std::int64_t hidden, std::uint64_t seed,
                                  DType dtype) {
    GruCellParams p;
    std::uint64_t k = 0;
    p.wz = glorot_init({input, hidden}, Rng::derive(seed, k++), dtype);
    p.wr = glorot_init({input, hidden}, Rng::derive(seed, k++), dtype);
    p.wh = glorot_init({input, hidden}, Rng::derive(seed, k++), dtype);
    p.uz = glorot_init({hidden, hidden}, Rng::derive(seed, k++), dtype);
    p.ur = glorot_init({hidden, hidden}, Rng::derive(seed, k++), dtype);
    p.uh = glorot_init({hidden, hidden}, Rng::derive(seed, k++), dtype);
    p.bz = Tensor::zeros({hidden}, dtype);
    p.br = Tensor::zeros({hidden}, dtype);
    p.bh = Tensor::zeros({hidden}, dtype);
    return p;
}

void GruCellParams::collect(const std::string& prefix,
                            std::vector<std::pair<std::string, Tensor*>>& out) {
    out.emplace_back(prefix + ".wz", &wz);
    out.emplace_back(prefix + ".wr", &wr);
    out.emplace_back(prefix + ".wh", &wh);
    out.emplace_back(prefix + ".uz", &uz);
    out.emplace_back(prefix + ".ur", &ur);
    out.emplace_back(prefix + ".uh", &uh);
    out.emplace_back(prefix + ".bz", &bz);
    out.emplace_back(prefix + ".br", &br);
    out.emplace_back(prefix + ".bh", &bh);
}

GruCellParams GruCellParams::watched(Tape& tape) const {
    GruCellParams p;
    p.wz = tape.watch(wz);
    p.wr = tape.watch(wr);
    p.wh = tape.watch(wh);
    p.uz = tape.watch(uz);
    p.ur = tape.watch(ur);
    p.uh = tape.watch(uh);
    p.bz = tape.watch(bz);
    p.br = tape.watch(br);
    p.bh = tape.watch(bh);
    return p;
}

Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, const GruCellParams& params) {
    if (x_t.rank() != 2 || h_prev.rank() != 2) {
        throw DimensionError("gru_cell: x_t and h_prev must be [N,input] and [N,hidden]");
    }
    if (x_t.extent(0) != h_prev.extent(0)) {
        throw DimensionError("gru_cell: batch extents differ (" + std::to_string(x_t.extent(0)) +
                             " vs " + std::to_string(h_prev.extent(0)) + ")");
    }
    if (x_t.extent(1) != params.input_size() || h_prev.extent(1) != params.hidden_size()) {
        throw DimensionError("gru_cell: extents (" + std::to_string(x_t.extent(1)) + "," +
                             std::to_string(h_prev.extent(1)) + ") do not match params (" +
                             std::to_string(params.input_size()) + "," +
                             std::to_string(params.hidden_size()) + ")");
    }
    Tensor z = activation(add(affine(x_t, params.wz, params.bz), matmul(h_prev, params.uz)),
                          Act::sigmoid);
    Tensor r = activation(add(affine(x_t, params.wr, params.br), matmul(h_prev, params.ur)),
                          Act::sigmoid);
    Tensor hh = activation(
        add(affine(x_t, params.wh, params.bh), matmul(mul(r, h_prev), params.uh)), Act::tanh);
    Tensor keep = add_scalar(scale(z, -1.0), 1.0);
    return add(mul(keep, h_prev), mul(z, hh));
}

std::vector<Tensor> bigru(const std::vector<Tensor>& sequence, const GruCellParams& fwd,
                          const GruCellParams& bwd) {
    if (sequence.empty()) throw ContractError("bigru: empty sequence");
    const std::int64_t n = sequence.front().extent(0);
    const std::size_t t = sequence.size();
    std::vector<Tensor> hs_f(t), hs_b(t);
    Tensor h = Tensor::zeros({n, fwd.hidden_size()}, sequence.front().dtype());
    for (std::size_t i = 0; i < t; ++i) {
        h = gru_cell(sequence[i], h, fwd);
        hs_f[i] = h;
    }
    h = Tensor::zeros({n, bwd.hidden_size()}, sequence.front().dtype());
    for (std::size_t i = t; i-- > 0;) {
        h = gru_cell(sequence[i], h, bwd);
        hs_b[i] = h;
    }
    std::vector<Tensor> out(t);
    for (std::size_t i = 0; i < t; ++i) out[i] = concat_last({hs_f[i], hs_b[i]});
    return out;
}

// --- Generator -------------------------------------------------------------------

namespace {

Tensor maybe_watch(const Tensor& t, Tape* tape) { return tape ? tape->watch(t) : t; }

} // namespace

Generator Generator::build(const GeneratorSpec& spec, std::uint64_t seed) {
    spec.validate();
    Generator g;
    g.spec_ = spec;
    const auto C = spec.channels, T = spec.timepoints;
    const auto F1 = spec.base_filters, F2 = spec.fused_filters();
    const auto steps = spec.bottleneck_steps();
    const auto dt = spec.dtype;
    std::uint64_t k = 0;
    auto next = [&] { return Rng::derive(seed, k++); };

    g.enc_k1_ = glorot_init({F1, 1, 1, T / 2}, next(), dt);
    g.enc_g1_ = Tensor::full({F1}, 1.0, dt);
    g.enc_b1_ = Tensor::zeros({F1}, dt);
    g.enc_bn1_ = BatchNormState(F1);
    g.enc_k2_ = glorot_init({F2, 1, C, 1}, next(), dt, static_cast<int>(F1));
    g.enc_g2_ = Tensor::full({F2}, 1.0, dt);
    g.enc_b2_ = Tensor::zeros({F2}, dt);
    g.enc_bn2_ = BatchNormState(F2);
    g.enc_k3_ = glorot_init({F2, 1, 1, 16}, next(), dt, static_cast<int>(F2));
    g.enc_k4_ = glorot_init({F2, F2, 1, 1}, next(), dt);
    g.enc_g3_ = Tensor::full({F2}, 1.0, dt);
    g.enc_b3_ = Tensor::zeros({F2}, dt);
    g.enc_bn3_ = BatchNormState(F2);

    if (variant_has_rnn(spec.variant)) {
        g.rnn_fwd_ = GruCellParams::init(F2, spec.gru_hidden, next(), dt);
        g.rnn_bwd_ = GruCellParams::init(F2, spec.gru_hidden, next(), dt);
        const auto H = spec.decoder_hidden();
        g.dec_h0_w_ = glorot_init({spec.latent, H}, next(), dt);
        g.dec_h0_b_ = Tensor::zeros({H}, dt);
        g.dec_gru_ = GruCellParams::init(F2, H, next(), dt);
        g.dec_out_w_ = glorot_init({H, F2}, next(), dt);
        g.dec_out_b_ = Tensor::zeros({F2}, dt);
    } else {
        g.enc_proj_w_ = glorot_init({F2 * steps, spec.latent}, next(), dt);
        g.enc_proj_b_ = Tensor::zeros({spec.latent}, dt);
        g.dec_proj_w_ = glorot_init({spec.latent, F2 * steps}, next(), dt);
        g.dec_proj_b_ = Tensor::zeros({F2 * steps}, dt);
    }

    g.dec_k1_ = glorot_init({F2, F2, 1, 8}, next(), dt);
    g.dec_g1_ = Tensor::full({F2}, 1.0, dt);
    g.dec_b1_ = Tensor::zeros({F2}, dt);
    g.dec_bn1_ = BatchNormState(F2);
    g.dec_k2_ = glorot_init({F2, F2, 1, 17}, next(), dt);
    g.dec_g2_ = Tensor::full({F2}, 1.0, dt);
    g.dec_b2_ = Tensor::zeros({F2}, dt);
    g.dec_bn2_ = BatchNormState(F2);
    g.dec_k3_ = glorot_init({F2, F1, C, 1}, next(), dt);
    g.dec_g3_ = Tensor::full({F1}, 1.0, dt);
    g.dec_b3_ = Tensor::zeros({F1}, dt);
    g.dec_bn3_ = BatchNormState(F1);
    g.dec_k4_ = glorot_init({F1, 1, 1, T / 2}, next(), dt);
    return g;
}

Tensor Generator::encode_map(const Tensor& x, BnMode mode, Tape* watch) {
    const auto C = spec_.channels, T = spec_.timepoints;
    if (x.rank() != 4 || x.extent(1) != 1 || x.extent(2) != C || x.extent(3) != T) {
        throw DimensionError("generator: expected input [N,1," + std::to_string(C) + "," +
                             std::to_string(T) + "]");
    }
    Tensor h = conv2d(x, maybe_watch(enc_k1_, watch), {1, 1}, {0, static_cast<int>(T / 4)});
    h = narrow_last(h, 0, T);
    h = batchnorm2d(h, maybe_watch(enc_g1_, watch), maybe_watch(enc_b1_, watch), enc_bn1_, mode);
    h = conv2d(h, maybe_watch(enc_k2_, watch), {1, 1}, {0, 0},
               static_cast<int>(spec_.base_filters));
    h = batchnorm2d(h, maybe_watch(enc_g2_, watch), maybe_watch(enc_b2_, watch), enc_bn2_, mode);
    h = activation(h, Act::elu);
    h = avg_pool2d(h, {1, 4});
    h = conv2d(h, maybe_watch(enc_k3_, watch), {1, 1}, {0, 8},
               static_cast<int>(spec_.fused_filters()));
    h = narrow_last(h, 0, T / 4);
    h = conv2d(h, maybe_watch(enc_k4_, watch));
    h = batchnorm2d(h, maybe_watch(enc_g3_, watch), maybe_watch(enc_b3_, watch), enc_bn3_, mode);
    h = activation(h, Act::elu);
    h = avg_pool2d(h, {1, 8});
    return h;
}

Tensor Generator::encode_batch(const Tensor& x, BnMode mode, Tape* watch) {
    Tensor map = encode_map(x, mode, watch);
    const auto steps = spec_.bottleneck_steps();
    if (variant_has_rnn(spec_.variant)) {
        const GruCellParams fwd = watch ? rnn_fwd_.watched(*watch) : rnn_fwd_;
        const GruCellParams bwd = watch ? rnn_bwd_.watched(*watch) : rnn_bwd_;
        const std::int64_t n = map.extent(0);
        Tensor hf = Tensor::zeros({n, spec_.gru_hidden}, map.dtype());
        for (std::int64_t t = 0; t < steps; ++t) {
            hf = gru_cell(time_slice(map, t), hf, fwd);
        }
        Tensor hb = Tensor::zeros({n, spec_.gru_hidden}, map.dtype());
        for (std::int64_t t = steps; t-- > 0;) {
            hb = gru_cell(time_slice(map, t), hb, bwd);
        }
        return concat_last({hf, hb});
    }
    Tensor flat = reshape(map, {map.extent(0), spec_.fused_filters() * steps});
    return affine(flat, maybe_watch(enc_proj_w_, watch), maybe_watch(enc_proj_b_, watch));
}

Tensor Generator::decode_batch(const Tensor& o, BnMode mode, Tape* watch) {
    if (o.rank() != 2 || o.extent(1) != spec_.latent) {
        throw DimensionError("generator decode: expected [N," + std::to_string(spec_.latent) +
                             "] latent input");
    }
    const auto T = spec_.timepoints;
    const auto F2 = spec_.fused_filters();
    const auto steps = spec_.bottleneck_steps();
    const std::int64_t n = o.extent(0);
    Tensor map;
    if (variant_has_rnn(spec_.variant)) {
        Tensor h = activation(
            affine(o, maybe_watch(dec_h0_w_, watch), maybe_watch(dec_h0_b_, watch)), Act::tanh);
        const GruCellParams gru = watch ? dec_gru_.watched(*watch) : dec_gru_;
        const Tensor ow = maybe_watch(dec_out_w_, watch);
        const Tensor ob = maybe_watch(dec_out_b_, watch);
        Tensor step_in = Tensor::zeros({n, F2}, o.dtype());
        std::vector<Tensor> outs;
        outs.reserve(static_cast<std::size_t>(steps));
        for (std::int64_t t = 0; t < steps; ++t) {
            h = gru_cell(step_in, h, gru);
            step_in = affine(h, ow, ob);
            outs.push_back(step_in);
        }
        map = time_stack(outs);
    } else {
        Tensor flat = affine(o, maybe_watch(dec_proj_w_, watch), maybe_watch(dec_proj_b_, watch));
        map = reshape(flat, {n, F2, 1, steps});
    }
    Tensor h = conv2d_transpose(map, maybe_watch(dec_k1_, watch), {1, 8});
    h = batchnorm2d(h, maybe_watch(dec_g1_, watch), maybe_watch(dec_b1_, watch), dec_bn1_, mode);
    h = activation(h, Act::elu);
    h = conv2d_transpose(h, maybe_watch(dec_k2_, watch), {1, 1}, {0, 8});
    h = batchnorm2d(h, maybe_watch(dec_g2_, watch), maybe_watch(dec_b2_, watch), dec_bn2_, mode);
    h = activation(h, Act::elu);
    h = conv2d_transpose(h, maybe_watch(dec_k3_, watch));
    h = batchnorm2d(h, maybe_watch(dec_g3_, watch), maybe_watch(dec_b3_, watch), dec_bn3_, mode);
    h = activation(h, Act::elu);
    h = conv2d_transpose(h, maybe_watch(dec_k4_, watch), {1, 4},
                         {0, static_cast<int>(T / 4 - 2)});
    return h;
}

std::pair<Tensor, Tensor> Generator::autoencode(const Tensor& x, BnMode mode, Tape* watch) {
    Tensor o = encode_batch(x, mode, watch);
    Tensor y = decode_batch(o, mode, watch);
    return {y, o};
}

std::vector<double> Generator::encode_one(const Tensor& x_ct) {
    if (x_ct.rank() != 2) throw DimensionError("encode_one: expected [C,T] segment");
    Tensor batched = reshape(x_ct, {1, 1, x_ct.extent(0), x_ct.extent(1)});
    Tensor o = encode_batch(batched, BnMode::eval);
    return o.values();
}

Tensor Generator::decode_one(const std::vector<double>& latent) {
    Tensor o({1, static_cast<std::int64_t>(latent.size())}, latent, spec_.dtype);
    Tensor y = decode_batch(o, BnMode::eval);
    return reshape(y, {spec_.channels, spec_.timepoints});
}

std::vector<std::pair<std::string, Tensor*>> Generator::named_parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("enc.k1", &enc_k1_);
    out.emplace_back("enc.g1", &enc_g1_);
    out.emplace_back("enc.b1", &enc_b1_);
    out.emplace_back("enc.k2", &enc_k2_);
    out.emplace_back("enc.g2", &enc_g2_);
    out.emplace_back("enc.b2", &enc_b2_);
    out.emplace_back("enc.k3", &enc_k3_);
    out.emplace_back("enc.k4", &enc_k4_);
    out.emplace_back("enc.g3", &enc_g3_);
    out.emplace_back("enc.b3", &enc_b3_);
    if (variant_has_rnn(spec_.variant)) {
        rnn_fwd_.collect("enc.gru_f", out);
        rnn_bwd_.collect("enc.gru_b", out);
        out.emplace_back("dec.h0_w", &dec_h0_w_);
        out.emplace_back("dec.h0_b", &dec_h0_b_);
        dec_gru_.collect("dec.gru", out);
        out.emplace_back("dec.out_w", &dec_out_w_);
        out.emplace_back("dec.out_b", &dec_out_b_);
    } else {
        out.emplace_back("enc.proj_w", &enc_proj_w_);
        out.emplace_back("enc.proj_b", &enc_proj_b_);
        out.emplace_back("dec.proj_w", &dec_proj_w_);
        out.emplace_back("dec.proj_b", &dec_proj_b_);
    }
    out.emplace_back("dec.k1", &dec_k1_);
    out.emplace_back("dec.g1", &dec_g1_);
    out.emplace_back("dec.b1", &dec_b1_);
    out.emplace_back("dec.k2", &dec_k2_);
    out.emplace_back("dec.g2", &dec_g2_);
    out.emplace_back("dec.b2", &dec_b2_);
    out.emplace_back("dec.k3", &dec_k3_);
    out.emplace_back("dec.g3", &dec_g3_);
    out.emplace_back("dec.b3", &dec_b3_);
    out.emplace_back("dec.k4", &dec_k4_);
    return out;
}

std::vector<Tensor*> Generator::parameters() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::int64_t Generator::parameter_count() const {
    std::int64_t n = 0;
    for (auto& [name, t] : const_cast<Generator*>(this)->named_parameters()) n += t->size();
    return n;
}

std::vector<std::pair<std::string, std::vector<double>*>> Generator::named_buffers() {
    return {
        {"enc.bn1.mean", &enc_bn1_.running_mean}, {"enc.bn1.var", &enc_bn1_.running_var},
        {"enc.bn2.mean", &enc_bn2_.running_mean}, {"enc.bn2.var", &enc_bn2_.running_var},
        {"enc.bn3.mean", &enc_bn3_.running_mean}, {"enc.bn3.var", &enc_bn3_.running_var},
        {"dec.bn1.mean", &dec_bn1_.running_mean}, {"dec.bn1.var", &dec_bn1_.running_var},
        {"dec.bn2.mean", &dec_bn2_.running_mean}, {"dec.bn2.var", &dec_bn2_.running_var},
        {"dec.bn3.mean", &dec_bn3_.running_mean}, {"dec.bn3.var", &dec_bn3_.running_var},
    };
}

// --- Discriminator ----------------------------------------------------------------

Discriminator Discriminator::build(std::int64_t channels, std::int64_t timepoints,
                                   std::int64_t base_filters, std::int64_t depth_multiplier,
                                   std::uint64_t seed, DType dtype) {
    GeneratorSpec probe;
    probe.variant = Variant::cnn;
    probe.channels = channels;
    probe.timepoints = timepoints;
    probe.base_filters = base_filters;
    probe.depth_multiplier = depth_multiplier;
    probe.latent = 1;
    probe.validate();

    Discriminator d;
    d.channels_ = channels;
    d.timepoints_ = timepoints;
    d.base_filters_ = base_filters;
    d.depth_multiplier_ = depth_multiplier;
    const auto F1 = base_filters, F2 = base_filters * depth_multiplier;
    std::uint64_t k = 0;
    auto next = [&] { return Rng::derive(seed, k++); };
    d.k1_ = glorot_init({F1, 1, 1, timepoints / 2}, next(), dtype);
    d.g1_ = Tensor::full({F1}, 1.0, dtype);
    d.b1_ = Tensor::zeros({F1}, dtype);
    d.bn1_ = BatchNormState(F1);
    d.k2_ = glorot_init({F2, 1, channels, 1}, next(), dtype, static_cast<int>(F1));
    d.g2_ = Tensor::full({F2}, 1.0, dtype);
    d.b2_ = Tensor::zeros({F2}, dtype);
    d.bn2_ = BatchNormState(F2);
    d.k3_ = glorot_init({F2, 1, 1, 16}, next(), dtype, static_cast<int>(F2));
    d.k4_ = glorot_init({F2, F2, 1, 1}, next(), dtype);
    d.g3_ = Tensor::full({F2}, 1.0, dtype);
    d.b3_ = Tensor::zeros({F2}, dtype);
    d.bn3_ = BatchNormState(F2);
    d.head_w_ = glorot_init({F2, 1}, next(), dtype);
    d.head_b_ = Tensor::zeros({1}, dtype);
    return d;
}

Tensor Discriminator::forward(const Tensor& x, BnMode mode, Tape* watch) {
    const auto C = channels_, T = timepoints_;
    if (x.rank() != 4 || x.extent(1) != 1 || x.extent(2) != C || x.extent(3) != T) {
        throw DimensionError("discriminator: expected input [N,1," + std::to_string(C) + "," +
                             std::to_string(T) + "]");
    }
    Tensor h = conv2d(x, maybe_watch(k1_, watch), {1, 1}, {0, static_cast<int>(T / 4)});
    h = narrow_last(h, 0, T);
    h = batchnorm2d(h, maybe_watch(g1_, watch), maybe_watch(b1_, watch), bn1_, mode);
    h = conv2d(h, maybe_watch(k2_, watch), {1, 1}, {0, 0}, static_cast<int>(base_filters_));
    h = batchnorm2d(h, maybe_watch(g2_, watch), maybe_watch(b2_, watch), bn2_, mode);
    h = activation(h, Act::elu);
    h = avg_pool2d(h, {1, 4});
    h = conv2d(h, maybe_watch(k3_, watch), {1, 1}, {0, 8},
               static_cast<int>(base_filters_ * depth_multiplier_));
    h = narrow_last(h, 0, T / 4);
    h = conv2d(h, maybe_watch(k4_, watch));
    h = batchnorm2d(h, maybe_watch(g3_, watch), maybe_watch(b3_, watch), bn3_, mode);
    h = activation(h, Act::elu);
    h = avg_pool2d(h, {1, 8});
    h = avg_pool2d(h, {1, static_cast<int>(T / 32)});
    h = reshape(h, {h.extent(0), base_filters_ * depth_multiplier_});
    h = affine(h, maybe_watch(head_w_, watch), maybe_watch(head_b_, watch));
    return activation(h, Act::sigmoid);
}

double Discriminator::discriminate(const Tensor& x_ct) {
    if (x_ct.rank() != 2) throw DimensionError("discriminate: expected [C,T] segment");
    Tensor batched = reshape(x_ct, {1, 1, x_ct.extent(0), x_ct.extent(1)});
    return forward(batched, BnMode::eval).item();
}

std::vector<std::pair<std::string, Tensor*>> Discriminator::named_parameters() {
    return {
        {"d.k1", &k1_}, {"d.g1", &g1_}, {"d.b1", &b1_},
        {"d.k2", &k2_}, {"d.g2", &g2_}, {"d.b2", &b2_},
        {"d.k3", &k3_}, {"d.k4", &k4_}, {"d.g3", &g3_}, {"d.b3", &b3_},
        {"d.head_w", &head_w_}, {"d.head_b", &head_b_},
    };
}

std::vector<Tensor*> Discriminator::parameters() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::int64_t Discriminator::parameter_count() const {
    std::int64_t n = 0;
    for (auto& [name, t] : const_cast<Discriminator*>(this)->named_parameters()) n += t->size();
    return n;
}

std::vector<std::pair<std::string, std::vector<double>*>> Discriminator::named_buffers() {
    return {
        {"d.bn1.mean", &bn1_.running_mean}, {"d.bn1.var", &bn1_.running_var},
        {"d.bn2.mean", &bn2_.running_mean}, {"d.bn2.var", &bn2_.running_var},
        {"d.bn3.mean", &bn3_.running_mean}, {"d.bn3.var", &bn3_.running_var},
    };
}

// --- checkpoints ---------------------------------------------------------------

namespace {

constexpr char kCkptMagic[4] = {'E', 'F', 'C', '1'};

nlohmann::json spec_to_json(const GeneratorSpec& s) {
    return {
        {"variant", to_string(s.variant)},
        {"channels", s.channels},
        {"timepoints", s.timepoints},
        {"base_filters", s.base_filters},
        {"depth_multiplier", s.depth_multiplier},
        {"gru_hidden", s.gru_hidden},
        {"latent", s.latent},
        {"dtype", s.dtype == DType::f32 ? "f32" : "f64"},
    };
}

GeneratorSpec spec_from_json(const nlohmann::json& j) {
    GeneratorSpec s;
    s.variant = parse_variant(j.at("variant").get<std::string>());
    s.channels = j.at("channels").get<std::int64_t>();
    s.timepoints = j.at("timepoints").get<std::int64_t>();
    s.base_filters = j.at("base_filters").get<std::int64_t>();
    s.depth_multiplier = j.at("depth_multiplier").get<std::int64_t>();
    s.gru_hidden = j.at("gru_hidden").get<std::int64_t>();
    s.latent = j.at("latent").get<std::int64_t>();
    s.dtype = j.at("dtype").get<std::string>() == "f32" ? DType::f32 : DType::f64;
    return s;
}

void put_u64le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw DataError("checkpoint: truncated header");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, Generator& gen, Discriminator* disc,
                     const CheckpointMeta& meta) {
    nlohmann::json j;
    j["format"] = "EFC1";
    j["spec"] = spec_to_json(gen.spec());
    j["meta"] = {
        {"seed", meta.seed},     {"epoch", meta.epoch},
        {"loss_g", meta.loss_g}, {"loss_d", meta.loss_d},
        {"mse_train", meta.mse_train}, {"mse_val", meta.mse_val},
        {"lambda_l1", meta.lambda_l1},
    };
    j["has_discriminator"] = disc != nullptr;
    std::vector<std::string> names;
    std::vector<Tensor> blobs;
    for (auto& [name, t] : gen.named_parameters()) {
        names.push_back(name);
        blobs.push_back(*t);
    }
    for (auto& [name, buf] : gen.named_buffers()) {
        names.push_back(name);
        blobs.emplace_back(std::vector<std::int64_t>{static_cast<std::int64_t>(buf->size())},
                           *buf);
    }
    if (disc) {
        for (auto& [name, t] : disc->named_parameters()) {
            names.push_back(name);
            blobs.push_back(*t);
        }
        for (auto& [name, buf] : disc->named_buffers()) {
            names.push_back(name);
            blobs.emplace_back(std::vector<std::int64_t>{static_cast<std::int64_t>(buf->size())},
                               *buf);
        }
        j["disc"] = {{"base_filters", disc->base_filters()},
                     {"depth_multiplier", disc->depth_multiplier()}};
    }
    j["tensors"] = names;
    const std::string payload = j.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint for write: " + path);
    out.write(kCkptMagic, 4);
    put_u64le(out, payload.size());
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    for (const auto& b : blobs) write_tensor(out, b);
    if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint for read: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0) {
        throw DataError("checkpoint: bad magic (expected EFC1): " + path);
    }
    const std::uint64_t len = get_u64le(in);
    std::string payload(len, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("checkpoint: truncated manifest: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: manifest parse error: ") + e.what());
    }
    const GeneratorSpec spec = spec_from_json(j.at("spec"));
    CheckpointMeta meta;
    const auto& jm = j.at("meta");
    meta.seed = jm.at("seed").get<std::uint64_t>();
    meta.epoch = jm.at("epoch").get<std::int64_t>();
    meta.loss_g = jm.at("loss_g").get<double>();
    meta.loss_d = jm.at("loss_d").get<double>();
    meta.mse_train = jm.at("mse_train").get<double>();
    meta.mse_val = jm.at("mse_val").get<double>();
    meta.lambda_l1 = jm.at("lambda_l1").get<double>();

    Generator gen = Generator::build(spec, meta.seed);
    std::optional<Discriminator> disc;
    if (j.at("has_discriminator").get<bool>()) {
        disc = Discriminator::build(spec.channels, spec.timepoints,
                                    j.at("disc").at("base_filters").get<std::int64_t>(),
                                    j.at("disc").at("depth_multiplier").get<std::int64_t>(),
                                    meta.seed, spec.dtype);
    }

    std::unordered_map<std::string, Tensor*> param_slots;
    std::unordered_map<std::string, std::vector<double>*> buffer_slots;
    for (auto& [name, t] : gen.named_parameters()) param_slots[name] = t;
    for (auto& [name, b] : gen.named_buffers()) buffer_slots[name] = b;
    if (disc) {
        for (auto& [name, t] : disc->named_parameters()) param_slots[name] = t;
        for (auto& [name, b] : disc->named_buffers()) buffer_slots[name] = b;
    }
    for (const auto& name : j.at("tensors").get<std::vector<std::string>>()) {
        Tensor t = read_tensor(in);
        if (auto it = param_slots.find(name); it != param_slots.end()) {
            if (it->second->shape() != t.shape()) {
                throw DataError("checkpoint: shape mismatch for tensor '" + name + "'");
            }
            *it->second = t;
        } else if (auto bit = buffer_slots.find(name); bit != buffer_slots.end()) {
            if (bit->second->size() != static_cast<std::size_t>(t.size())) {
                throw DataError("checkpoint: size mismatch for buffer '" + name + "'");
            }
            *bit->second = t.values();
        } else {
            throw DataError("checkpoint: unknown tensor '" + name + "'");
        }
    }
    return Checkpoint(std::move(gen), std::move(disc), meta);
}

} // namespace fusenet
