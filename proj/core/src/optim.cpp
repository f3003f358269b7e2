#include "fusenet/optim.hpp"

#include <cmath>

#include "fusenet/errors.hpp"

namespace fusenet {

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr) {
    if (params.size() != grads.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " params vs " +
                             std::to_string(grads.size()) + " grads");
    }
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(static_cast<std::size_t>(params[i]->size()), 0.0);
            state.v[i].assign(static_cast<std::size_t>(params[i]->size()), 0.0);
        }
    }
    if (state.m.size() != params.size()) {
        throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) +
                             " params, got " + std::to_string(params.size()));
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (g.shape() != p.shape()) {
            throw DimensionError("adam_step: grad shape mismatch at parameter " +
                                 std::to_string(i));
        }
        if (state.m[i].size() != static_cast<std::size_t>(p.size())) {
            throw DimensionError("adam_step: moment size mismatch at parameter " +
                                 std::to_string(i));
        }
        std::vector<double> next(p.values());
        const auto& gv = g.values();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < next.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gv[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gv[j] * gv[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            next[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        p = Tensor(p.shape(), std::move(next), p.dtype());
    }
}

} // namespace fusenet
