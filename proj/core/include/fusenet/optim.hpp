#pragma once

#include <cstdint>
#include <vector>

#include "fusenet/tensor.hpp"

namespace fusenet {

/// Per-parameter Adam moments. Lazily sized on the first step.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

/// One Adam update over a parameter set. Each params[i] is rebound to a fresh
/// tensor (original buffers are never mutated); the grads must align with the
/// parameters in order and shape.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr);

} // namespace fusenet
