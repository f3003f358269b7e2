#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "fusenet/tensor.hpp"

namespace fusenet {

using Pair = std::pair<int, int>;

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double k);
Tensor add_scalar(const Tensor& x, double c);
Tensor log_values(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

enum class Act { elu, sigmoid, tanh };
Tensor activation(const Tensor& x, Act kind);

// --- linear / structural -------------------------------------------------------

/// x[N,F] * w[F,G] (no bias).
Tensor matmul(const Tensor& x, const Tensor& w);
/// x[N,F] * w[F,G] + bias[G] broadcast over rows.
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor reshape(const Tensor& x, std::vector<std::int64_t> new_shape);
/// Slice [start, start+length) along the last axis.
Tensor narrow_last(const Tensor& x, std::int64_t start, std::int64_t length);
/// Concatenate along the last axis; all leading extents must agree.
Tensor concat_last(const std::vector<Tensor>& parts);
/// x[N,C,1,W] -> column t as [N,C].
Tensor time_slice(const Tensor& x, std::int64_t t);
/// T steps of [N,C] -> [N,C,1,T].
Tensor time_stack(const std::vector<Tensor>& steps);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// --- convolution stack ---------------------------------------------------------

/// Cross-correlation on [N,Cin,H,W] with kernel [Cout,Cin/groups,kh,kw].
/// H' = floor((H + 2*pad_h - kh) / stride_h) + 1, same for W'.
Tensor conv2d(const Tensor& input, const Tensor& kernel, Pair stride = {1, 1},
              Pair padding = {0, 0}, int groups = 1);

/// Adjoint map of conv2d on [N,Cin,H,W] with kernel [Cin,Cout,kh,kw].
/// H' = (H-1)*stride_h + kh - 2*pad_h + out_pad_h, same for W'.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, Pair stride = {1, 1},
                        Pair padding = {0, 0}, Pair output_padding = {0, 0});

/// Non-overlapping average pooling (stride == kernel).
Tensor avg_pool2d(const Tensor& x, Pair kernel);

struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNormState(std::int64_t channels = 0)
        : running_mean(static_cast<std::size_t>(channels), 0.0),
          running_var(static_cast<std::size_t>(channels), 1.0) {}
    std::int64_t channels() const { return static_cast<std::int64_t>(running_mean.size()); }
};

enum class BnMode { train, eval };

/// Per-channel batch normalization over (N,H,W). Train mode normalizes with
/// batch statistics and updates the running stats; eval mode uses the stored
/// running stats.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, BnMode mode);

// --- initialization / checking ---------------------------------------------------

/// Uniform Glorot init on +-sqrt(6 / (fan_in + fan_out)), deterministic per
/// seed. Fans: rank-1 -> (n, n); rank-2 [in,out]; rank-4 kernels use
/// fan_in = shape[1]*kh*kw and fan_out = shape[0]/groups*kh*kw.
Tensor glorot_init(const std::vector<std::int64_t>& shape, std::uint64_t seed,
                   DType dtype = DType::f64, int groups = 1);

/// Max over all input coordinates of |analytic - numeric| / max(1, |numeric|),
/// with central differences of half-width eps. f must return a scalar.
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  const std::vector<Tensor>& inputs, double eps = 1e-5);

} // namespace fusenet
