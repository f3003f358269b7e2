#include "fusenet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fusenet/rng.hpp"

namespace fusenet {

namespace {

using detail::make_result;
using Values = std::shared_ptr<const std::vector<double>>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        std::ostringstream msg;
        msg << op << ": shape mismatch (";
        for (auto e : a.shape()) msg << e << " ";
        msg << "vs ";
        for (auto e : b.shape()) msg << e << " ";
        msg << ")";
        throw DimensionError(msg.str());
    }
}

/// g accumulated verbatim into node's adjoint.
void acc(Tape& tape, int node, const std::vector<double>& g) {
    if (node < 0) return;
    auto& a = tape.adjoint(node);
    for (std::size_t i = 0; i < g.size(); ++i) a[i] += g[i];
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    return a > 0 ? (a + b - 1) / b : a / b;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    return a >= 0 ? a / b : (a - b + 1) / b;
}

// Valid index range [lo, hi) such that 0 <= o*stride + k - pad < limit.
void valid_range(std::int64_t count, std::int64_t stride, std::int64_t k, std::int64_t pad,
                 std::int64_t limit, std::int64_t& lo, std::int64_t& hi) {
    lo = std::max<std::int64_t>(0, ceil_div(pad - k, stride));
    hi = std::min<std::int64_t>(count, floor_div(limit - 1 - k + pad, stride) + 1);
    if (hi < lo) hi = lo;
}

struct ConvDims {
    std::int64_t n, cin, h, w;
    std::int64_t cout, kh, kw;
    std::int64_t sh, sw, ph, pw;
    std::int64_t groups, cin_g, cout_g;
    std::int64_t ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& k, Pair stride, Pair padding, int groups) {
    if (x.rank() != 4) {
        throw DimensionError("conv2d: input rank " + std::to_string(x.rank()) + " != 4");
    }
    if (k.rank() != 4) {
        throw DimensionError("conv2d: kernel rank " + std::to_string(k.rank()) + " != 4");
    }
    if (groups < 1) throw DimensionError("conv2d: groups must be >= 1");
    if (stride.first < 1 || stride.second < 1) throw DimensionError("conv2d: stride must be >= 1");
    if (padding.first < 0 || padding.second < 0) throw DimensionError("conv2d: negative padding");
    ConvDims d;
    d.n = x.extent(0);
    d.cin = x.extent(1);
    d.h = x.extent(2);
    d.w = x.extent(3);
    d.cout = k.extent(0);
    d.kh = k.extent(2);
    d.kw = k.extent(3);
    d.sh = stride.first;
    d.sw = stride.second;
    d.ph = padding.first;
    d.pw = padding.second;
    d.groups = groups;
    if (d.cin % d.groups != 0) {
        throw DimensionError("conv2d: input channels (axis 1) " + std::to_string(d.cin) +
                             " not divisible by groups " + std::to_string(d.groups));
    }
    if (d.cout % d.groups != 0) {
        throw DimensionError("conv2d: output channels (kernel axis 0) " + std::to_string(d.cout) +
                             " not divisible by groups " + std::to_string(d.groups));
    }
    d.cin_g = d.cin / d.groups;
    d.cout_g = d.cout / d.groups;
    if (k.extent(1) != d.cin_g) {
        throw DimensionError("conv2d: kernel axis 1 = " + std::to_string(k.extent(1)) +
                             ", expected input channels / groups = " + std::to_string(d.cin_g));
    }
    if (d.h + 2 * d.ph < d.kh) {
        throw DimensionError("conv2d: padded height (axis 2) " + std::to_string(d.h + 2 * d.ph) +
                             " < kernel height " + std::to_string(d.kh));
    }
    if (d.w + 2 * d.pw < d.kw) {
        throw DimensionError("conv2d: padded width (axis 3) " + std::to_string(d.w + 2 * d.pw) +
                             " < kernel width " + std::to_string(d.kw));
    }
    d.ho = (d.h + 2 * d.ph - d.kh) / d.sh + 1;
    d.wo = (d.w + 2 * d.pw - d.kw) / d.sw + 1;
    return d;
}

void conv_forward(const std::vector<double>& x, const std::vector<double>& k,
                  std::vector<double>& out, const ConvDims& d) {
    for (std::int64_t n = 0; n < d.n; ++n) {
        for (std::int64_t g = 0; g < d.groups; ++g) {
            for (std::int64_t cog = 0; cog < d.cout_g; ++cog) {
                const std::int64_t co = g * d.cout_g + cog;
                double* outc = out.data() + ((n * d.cout + co) * d.ho) * d.wo;
                for (std::int64_t cig = 0; cig < d.cin_g; ++cig) {
                    const std::int64_t ci = g * d.cin_g + cig;
                    const double* xc = x.data() + ((n * d.cin + ci) * d.h) * d.w;
                    const double* kc = k.data() + ((co * d.cin_g + cig) * d.kh) * d.kw;
                    for (std::int64_t r = 0; r < d.kh; ++r) {
                        std::int64_t hlo, hhi;
                        valid_range(d.ho, d.sh, r, d.ph, d.h, hlo, hhi);
                        for (std::int64_t s = 0; s < d.kw; ++s) {
                            const double kv = kc[r * d.kw + s];
                            std::int64_t wlo, whi;
                            valid_range(d.wo, d.sw, s, d.pw, d.w, wlo, whi);
                            for (std::int64_t ho = hlo; ho < hhi; ++ho) {
                                const std::int64_t hi = ho * d.sh + r - d.ph;
                                const double* xrow = xc + hi * d.w + (s - d.pw);
                                double* orow = outc + ho * d.wo;
                                if (d.sw == 1) {
                                    for (std::int64_t wo = wlo; wo < whi; ++wo) {
                                        orow[wo] += kv * xrow[wo];
                                    }
                                } else {
                                    for (std::int64_t wo = wlo; wo < whi; ++wo) {
                                        orow[wo] += kv * xrow[wo * d.sw];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv_backward_input(const std::vector<double>& gout, const std::vector<double>& k,
                         std::vector<double>& dx, const ConvDims& d) {
    for (std::int64_t n = 0; n < d.n; ++n) {
        for (std::int64_t g = 0; g < d.groups; ++g) {
            for (std::int64_t cog = 0; cog < d.cout_g; ++cog) {
                const std::int64_t co = g * d.cout_g + cog;
                const double* gc = gout.data() + ((n * d.cout + co) * d.ho) * d.wo;
                for (std::int64_t cig = 0; cig < d.cin_g; ++cig) {
                    const std::int64_t ci = g * d.cin_g + cig;
                    double* dxc = dx.data() + ((n * d.cin + ci) * d.h) * d.w;
                    const double* kc = k.data() + ((co * d.cin_g + cig) * d.kh) * d.kw;
                    for (std::int64_t r = 0; r < d.kh; ++r) {
                        std::int64_t hlo, hhi;
                        valid_range(d.ho, d.sh, r, d.ph, d.h, hlo, hhi);
                        for (std::int64_t s = 0; s < d.kw; ++s) {
                            const double kv = kc[r * d.kw + s];
                            std::int64_t wlo, whi;
                            valid_range(d.wo, d.sw, s, d.pw, d.w, wlo, whi);
                            for (std::int64_t ho = hlo; ho < hhi; ++ho) {
                                const std::int64_t hi = ho * d.sh + r - d.ph;
                                double* dxrow = dxc + hi * d.w + (s - d.pw);
                                const double* grow = gc + ho * d.wo;
                                for (std::int64_t wo = wlo; wo < whi; ++wo) {
                                    dxrow[wo * d.sw] += kv * grow[wo];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv_backward_kernel(const std::vector<double>& x, const std::vector<double>& gout,
                          std::vector<double>& dk, const ConvDims& d) {
    for (std::int64_t n = 0; n < d.n; ++n) {
        for (std::int64_t g = 0; g < d.groups; ++g) {
            for (std::int64_t cog = 0; cog < d.cout_g; ++cog) {
                const std::int64_t co = g * d.cout_g + cog;
                const double* gc = gout.data() + ((n * d.cout + co) * d.ho) * d.wo;
                for (std::int64_t cig = 0; cig < d.cin_g; ++cig) {
                    const std::int64_t ci = g * d.cin_g + cig;
                    const double* xc = x.data() + ((n * d.cin + ci) * d.h) * d.w;
                    double* kc = dk.data() + ((co * d.cin_g + cig) * d.kh) * d.kw;
                    for (std::int64_t r = 0; r < d.kh; ++r) {
                        std::int64_t hlo, hhi;
                        valid_range(d.ho, d.sh, r, d.ph, d.h, hlo, hhi);
                        for (std::int64_t s = 0; s < d.kw; ++s) {
                            std::int64_t wlo, whi;
                            valid_range(d.wo, d.sw, s, d.pw, d.w, wlo, whi);
                            double acc2 = 0.0;
                            for (std::int64_t ho = hlo; ho < hhi; ++ho) {
                                const std::int64_t hi = ho * d.sh + r - d.ph;
                                const double* xrow = xc + hi * d.w + (s - d.pw);
                                const double* grow = gc + ho * d.wo;
                                for (std::int64_t wo = wlo; wo < whi; ++wo) {
                                    acc2 += xrow[wo * d.sw] * grow[wo];
                                }
                            }
                            kc[r * d.kw + s] += acc2;
                        }
                    }
                }
            }
        }
    }
}

struct ConvTDims {
    std::int64_t n, cin, h, w;
    std::int64_t cout, kh, kw;
    std::int64_t sh, sw, ph, pw, oph, opw;
    std::int64_t ho, wo;
};

ConvTDims convt_dims(const Tensor& x, const Tensor& k, Pair stride, Pair padding, Pair out_pad) {
    if (x.rank() != 4) {
        throw DimensionError("conv2d_transpose: input rank " + std::to_string(x.rank()) + " != 4");
    }
    if (k.rank() != 4) {
        throw DimensionError("conv2d_transpose: kernel rank " + std::to_string(k.rank()) + " != 4");
    }
    if (stride.first < 1 || stride.second < 1) {
        throw DimensionError("conv2d_transpose: stride must be >= 1");
    }
    if (padding.first < 0 || padding.second < 0 || out_pad.first < 0 || out_pad.second < 0) {
        throw DimensionError("conv2d_transpose: negative padding");
    }
    ConvTDims d;
    d.n = x.extent(0);
    d.cin = x.extent(1);
    d.h = x.extent(2);
    d.w = x.extent(3);
    if (k.extent(0) != d.cin) {
        throw DimensionError("conv2d_transpose: kernel axis 0 = " + std::to_string(k.extent(0)) +
                             ", expected input channels " + std::to_string(d.cin));
    }
    d.cout = k.extent(1);
    d.kh = k.extent(2);
    d.kw = k.extent(3);
    d.sh = stride.first;
    d.sw = stride.second;
    d.ph = padding.first;
    d.pw = padding.second;
    d.oph = out_pad.first;
    d.opw = out_pad.second;
    d.ho = (d.h - 1) * d.sh + d.kh - 2 * d.ph + d.oph;
    d.wo = (d.w - 1) * d.sw + d.kw - 2 * d.pw + d.opw;
    if (d.ho < 1 || d.wo < 1) {
        throw DimensionError("conv2d_transpose: non-positive output extent " +
                             std::to_string(d.ho) + "x" + std::to_string(d.wo));
    }
    return d;
}

void convt_forward(const std::vector<double>& x, const std::vector<double>& k,
                   std::vector<double>& out, const ConvTDims& d) {
    for (std::int64_t n = 0; n < d.n; ++n) {
        for (std::int64_t ci = 0; ci < d.cin; ++ci) {
            const double* xc = x.data() + ((n * d.cin + ci) * d.h) * d.w;
            for (std::int64_t co = 0; co < d.cout; ++co) {
                double* outc = out.data() + ((n * d.cout + co) * d.ho) * d.wo;
                const double* kc = k.data() + ((ci * d.cout + co) * d.kh) * d.kw;
                for (std::int64_t r = 0; r < d.kh; ++r) {
                    std::int64_t hlo, hhi;
                    valid_range(d.h, d.sh, r, d.ph, d.ho, hlo, hhi);
                    for (std::int64_t s = 0; s < d.kw; ++s) {
                        const double kv = kc[r * d.kw + s];
                        std::int64_t wlo, whi;
                        valid_range(d.w, d.sw, s, d.pw, d.wo, wlo, whi);
                        for (std::int64_t h = hlo; h < hhi; ++h) {
                            const std::int64_t ho = h * d.sh + r - d.ph;
                            const double* xrow = xc + h * d.w;
                            double* orow = outc + ho * d.wo + (s - d.pw);
                            for (std::int64_t w = wlo; w < whi; ++w) {
                                orow[w * d.sw] += kv * xrow[w];
                            }
                        }
                    }
                }
            }
        }
    }
}

void convt_backward_input(const std::vector<double>& gout, const std::vector<double>& k,
                          std::vector<double>& dx, const ConvTDims& d) {
    for (std::int64_t n = 0; n < d.n; ++n) {
        for (std::int64_t ci = 0; ci < d.cin; ++ci) {
            double* dxc = dx.data() + ((n * d.cin + ci) * d.h) * d.w;
            for (std::int64_t co = 0; co < d.cout; ++co) {
                const double* gc = gout.data() + ((n * d.cout + co) * d.ho) * d.wo;
                const double* kc = k.data() + ((ci * d.cout + co) * d.kh) * d.kw;
                for (std::int64_t r = 0; r < d.kh; ++r) {
                    std::int64_t hlo, hhi;
                    valid_range(d.h, d.sh, r, d.ph, d.ho, hlo, hhi);
                    for (std::int64_t s = 0; s < d.kw; ++s) {
                        const double kv = kc[r * d.kw + s];
                        std::int64_t wlo, whi;
                        valid_range(d.w, d.sw, s, d.pw, d.wo, wlo, whi);
                        for (std::int64_t h = hlo; h < hhi; ++h) {
                            const std::int64_t ho = h * d.sh + r - d.ph;
                            double* dxrow = dxc + h * d.w;
                            const double* grow = gc + ho * d.wo + (s - d.pw);
                            for (std::int64_t w = wlo; w < whi; ++w) {
                                dxrow[w] += kv * grow[w * d.sw];
                            }
                        }
                    }
                }
            }
        }
    }
}

void convt_backward_kernel(const std::vector<double>& x, const std::vector<double>& gout,
                           std::vector<double>& dk, const ConvTDims& d) {
    for (std::int64_t n = 0; n < d.n; ++n) {
        for (std::int64_t ci = 0; ci < d.cin; ++ci) {
            const double* xc = x.data() + ((n * d.cin + ci) * d.h) * d.w;
            for (std::int64_t co = 0; co < d.cout; ++co) {
                const double* gc = gout.data() + ((n * d.cout + co) * d.ho) * d.wo;
                double* kc = dk.data() + ((ci * d.cout + co) * d.kh) * d.kw;
                for (std::int64_t r = 0; r < d.kh; ++r) {
                    std::int64_t hlo, hhi;
                    valid_range(d.h, d.sh, r, d.ph, d.ho, hlo, hhi);
                    for (std::int64_t s = 0; s < d.kw; ++s) {
                        std::int64_t wlo, whi;
                        valid_range(d.w, d.sw, s, d.pw, d.wo, wlo, whi);
                        double acc2 = 0.0;
                        for (std::int64_t h = hlo; h < hhi; ++h) {
                            const std::int64_t ho = h * d.sh + r - d.ph;
                            const double* xrow = xc + h * d.w;
                            const double* grow = gc + ho * d.wo + (s - d.pw);
                            for (std::int64_t w = wlo; w < whi; ++w) {
                                acc2 += xrow[w] * grow[w * d.sw];
                            }
                        }
                        kc[r * d.kw + s] += acc2;
                    }
                }
            }
        }
    }
}

} // namespace

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_result(a.shape(), std::move(out), promote(a.dtype(), b.dtype()), "add", {&a, &b},
                       [](const std::vector<double>& g, Tape& tape, const std::vector<int>& in) {
                           acc(tape, in[0], g);
                           acc(tape, in[1], g);
                       });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return make_result(a.shape(), std::move(out), promote(a.dtype(), b.dtype()), "sub", {&a, &b},
                       [](const std::vector<double>& g, Tape& tape, const std::vector<int>& in) {
                           acc(tape, in[0], g);
                           if (in[1] >= 0) {
                               auto& adj = tape.adjoint(in[1]);
                               for (std::size_t i = 0; i < g.size(); ++i) adj[i] -= g[i];
                           }
                       });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    Values av = a.storage(), bs = b.storage();
    return make_result(a.shape(), std::move(out), promote(a.dtype(), b.dtype()), "mul", {&a, &b},
                       [av, bs](const std::vector<double>& g, Tape& tape,
                                const std::vector<int>& in) {
                           if (in[0] >= 0) {
                               auto& adj = tape.adjoint(in[0]);
                               for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i] * (*bs)[i];
                           }
                           if (in[1] >= 0) {
                               auto& adj = tape.adjoint(in[1]);
                               for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i] * (*av)[i];
                           }
                       });
}

Tensor scale(const Tensor& x, double k) {
    std::vector<double> out(x.values());
    for (auto& v : out) v *= k;
    return make_result(x.shape(), std::move(out), x.dtype(), "scale", {&x},
                       [k](const std::vector<double>& g, Tape& tape, const std::vector<int>& in) {
                           if (in[0] < 0) return;
                           auto& adj = tape.adjoint(in[0]);
                           for (std::size_t i = 0; i < g.size(); ++i) adj[i] += k * g[i];
                       });
}

Tensor add_scalar(const Tensor& x, double c) {
    std::vector<double> out(x.values());
    for (auto& v : out) v += c;
    return make_result(x.shape(), std::move(out), x.dtype(), "add_scalar", {&x},
                       [](const std::vector<double>& g, Tape& tape, const std::vector<int>& in) {
                           acc(tape, in[0], g);
                       });
}

Tensor log_values(const Tensor& x) {
    std::vector<double> out(x.values());
    for (auto& v : out) v = std::log(v);
    Values xs = x.storage();
    return make_result(x.shape(), std::move(out), x.dtype(), "log", {&x},
                       [xs](const std::vector<double>& g, Tape& tape, const std::vector<int>& in) {
                           if (in[0] < 0) return;
                           auto& adj = tape.adjoint(in[0]);
                           for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i] / (*xs)[i];
                       });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
    std::vector<double> out(x.values());
    for (auto& v : out) v = std::min(std::max(v, lo), hi);
    Values xs = x.storage();
    return make_result(x.shape(), std::move(out), x.dtype(), "clamp", {&x},
                       [xs, lo, hi](const std::vector<double>& g, Tape& tape,
                                    const std::vector<int>& in) {
                           if (in[0] < 0) return;
                           auto& adj = tape.adjoint(in[0]);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               const double v = (*xs)[i];
                               if (v > lo && v < hi) adj[i] += g[i];
                           }
                       });
}

Tensor activation(const Tensor& x, Act kind) {
    std::vector<double> out(x.values());
    switch (kind) {
        case Act::elu:
            for (auto& v : out) v = v >= 0.0 ? v : std::expm1(v);
            break;
        case Act::sigmoid:
            for (auto& v : out) v = 1.0 / (1.0 + std::exp(-v));
            break;
        case Act::tanh:
            for (auto& v : out) v = std::tanh(v);
            break;
    }
    Values xs = x.storage();
    return make_result(
        x.shape(), std::move(out), x.dtype(), "activation", {&x},
        [xs, kind](const std::vector<double>& g, Tape& tape, const std::vector<int>& in) {
            if (in[0] < 0) return;
            auto& adj = tape.adjoint(in[0]);
            switch (kind) {
                case Act::elu:
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        const double v = (*xs)[i];
                        adj[i] += g[i] * (v >= 0.0 ? 1.0 : std::exp(v));
                    }
                    break;
                case Act::sigmoid:
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        const double s = 1.0 / (1.0 + std::exp(-(*xs)[i]));
                        adj[i] += g[i] * s * (1.0 - s);
                    }
                    break;
                case Act::tanh:
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        const double t = std::tanh((*xs)[i]);
                        adj[i] += g[i] * (1.0 - t * t);
                    }
                    break;
            }
        });
}

// --- linear / structural -------------------------------------------------------

Tensor matmul(const Tensor& x, const Tensor& w) {
    if (x.rank() != 2 || w.rank() != 2) {
        throw DimensionError("matmul: ranks " + std::to_string(x.rank()) + "," +
                             std::to_string(w.rank()) + " (need 2,2)");
    }
    if (x.extent(1) != w.extent(0)) {
        throw DimensionError("matmul: inner extents " + std::to_string(x.extent(1)) + " vs " +
                             std::to_string(w.extent(0)));
    }
    const std::int64_t n = x.extent(0), f = x.extent(1), g = w.extent(1);
    std::vector<double> out(static_cast<std::size_t>(n * g), 0.0);
    const auto& xv = x.values();
    const auto& wv = w.values();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < f; ++j) {
            const double xij = xv[static_cast<std::size_t>(i * f + j)];
            const double* wrow = wv.data() + j * g;
            double* orow = out.data() + i * g;
            for (std::int64_t k = 0; k < g; ++k) orow[k] += xij * wrow[k];
        }
    }
    Values xs = x.storage(), ws = w.storage();
    return make_result(
        {n, g}, std::move(out), promote(x.dtype(), w.dtype()), "matmul", {&x, &w},
        [xs, ws, n, f, g](const std::vector<double>& gout, Tape& tape,
                          const std::vector<int>& in) {
            if (in[0] >= 0) {
                auto& dx = tape.adjoint(in[0]);
                for (std::int64_t i = 0; i < n; ++i) {
                    const double* grow = gout.data() + i * g;
                    for (std::int64_t j = 0; j < f; ++j) {
                        const double* wrow = ws->data() + j * g;
                        double acc2 = 0.0;
                        for (std::int64_t k = 0; k < g; ++k) acc2 += grow[k] * wrow[k];
                        dx[static_cast<std::size_t>(i * f + j)] += acc2;
                    }
                }
            }
            if (in[1] >= 0) {
                auto& dw = tape.adjoint(in[1]);
                for (std::int64_t i = 0; i < n; ++i) {
                    const double* grow = gout.data() + i * g;
                    for (std::int64_t j = 0; j < f; ++j) {
                        const double xij = (*xs)[static_cast<std::size_t>(i * f + j)];
                        double* dwrow = dw.data() + j * g;
                        for (std::int64_t k = 0; k < g; ++k) dwrow[k] += xij * grow[k];
                    }
                }
            }
        });
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1) {
        throw DimensionError("affine: ranks " + std::to_string(x.rank()) + "," +
                             std::to_string(weight.rank()) + "," + std::to_string(bias.rank()) +
                             " (need 2,2,1)");
    }
    if (x.extent(1) != weight.extent(0)) {
        throw DimensionError("affine: inner extents " + std::to_string(x.extent(1)) + " vs " +
                             std::to_string(weight.extent(0)));
    }
    if (bias.extent(0) != weight.extent(1)) {
        throw DimensionError("affine: bias extent " + std::to_string(bias.extent(0)) +
                             " vs weight columns " + std::to_string(weight.extent(1)));
    }
    const std::int64_t n = x.extent(0), f = x.extent(1), g = weight.extent(1);
    std::vector<double> out(static_cast<std::size_t>(n * g));
    const auto& xv = x.values();
    const auto& wv = weight.values();
    const auto& bv = bias.values();
    for (std::int64_t i = 0; i < n; ++i) {
        double* orow = out.data() + i * g;
        for (std::int64_t k = 0; k < g; ++k) orow[k] = bv[static_cast<std::size_t>(k)];
        for (std::int64_t j = 0; j < f; ++j) {
            const double xij = xv[static_cast<std::size_t>(i * f + j)];
            const double* wrow = wv.data() + j * g;
            for (std::int64_t k = 0; k < g; ++k) orow[k] += xij * wrow[k];
        }
    }
    Values xs = x.storage(), ws = weight.storage();
    return make_result(
        {n, g}, std::move(out), promote(promote(x.dtype(), weight.dtype()), bias.dtype()),
        "affine", {&x, &weight, &bias},
        [xs, ws, n, f, g](const std::vector<double>& gout, Tape& tape,
                          const std::vector<int>& in) {
            if (in[0] >= 0) {
                auto& dx = tape.adjoint(in[0]);
                for (std::int64_t i = 0; i < n; ++i) {
                    const double* grow = gout.data() + i * g;
                    for (std::int64_t j = 0; j < f; ++j) {
                        const double* wrow = ws->data() + j * g;
                        double acc2 = 0.0;
                        for (std::int64_t k = 0; k < g; ++k) acc2 += grow[k] * wrow[k];
                        dx[static_cast<std::size_t>(i * f + j)] += acc2;
                    }
                }
            }
            if (in[1] >= 0) {
                auto& dw = tape.adjoint(in[1]);
                for (std::int64_t i = 0; i < n; ++i) {
                    const double* grow = gout.data() + i * g;
                    for (std::int64_t j = 0; j < f; ++j) {
                        const double xij = (*xs)[static_cast<std::size_t>(i * f + j)];
                        double* dwrow = dw.data() + j * g;
                        for (std::int64_t k = 0; k < g; ++k) dwrow[k] += xij * grow[k];
                    }
                }
            }
            if (in[2] >= 0) {
                auto& db = tape.adjoint(in[2]);
                for (std::int64_t i = 0; i < n; ++i) {
                    const double* grow = gout.data() + i * g;
                    for (std::int64_t k = 0; k < g; ++k) db[static_cast<std::size_t>(k)] += grow[k];
                }
            }
        });
}

Tensor reshape(const Tensor& x, std::vector<std::int64_t> new_shape) {
    const std::int64_t n = detail::shape_size(new_shape);
    if (n != x.size()) {
        throw DimensionError("reshape: new size " + std::to_string(n) + " != " +
                             std::to_string(x.size()));
    }
    return make_result(std::move(new_shape), x.values(), x.dtype(), "reshape", {&x},
                       [](const std::vector<double>& g, Tape& tape, const std::vector<int>& in) {
                           acc(tape, in[0], g);
                       });
}

Tensor narrow_last(const Tensor& x, std::int64_t start, std::int64_t length) {
    if (x.rank() < 1) throw DimensionError("narrow_last: rank-0 tensor");
    const std::int64_t w = x.shape().back();
    if (start < 0 || length < 1 || start + length > w) {
        throw DimensionError("narrow_last: window [" + std::to_string(start) + ", " +
                             std::to_string(start + length) + ") out of extent " +
                             std::to_string(w));
    }
    const std::int64_t outer = x.size() / w;
    std::vector<double> out(static_cast<std::size_t>(outer * length));
    const auto& xv = x.values();
    for (std::int64_t o = 0; o < outer; ++o) {
        const double* src = xv.data() + o * w + start;
        std::copy(src, src + length, out.data() + o * length);
    }
    auto shape = x.shape();
    shape.back() = length;
    return make_result(std::move(shape), std::move(out), x.dtype(), "narrow_last", {&x},
                       [w, start, length, outer](const std::vector<double>& g, Tape& tape,
                                                 const std::vector<int>& in) {
                           if (in[0] < 0) return;
                           auto& dx = tape.adjoint(in[0]);
                           for (std::int64_t o = 0; o < outer; ++o) {
                               const double* grow = g.data() + o * length;
                               double* dxrow = dx.data() + o * w + start;
                               for (std::int64_t i = 0; i < length; ++i) dxrow[i] += grow[i];
                           }
                       });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_last: no inputs");
    const auto& first = parts.front().shape();
    std::int64_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != first.size()) throw DimensionError("concat_last: rank mismatch");
        for (std::size_t a = 0; a + 1 < first.size(); ++a) {
            if (p.shape()[a] != first[a]) {
                throw DimensionError("concat_last: leading extent mismatch at axis " +
                                     std::to_string(a));
            }
        }
        total += p.shape().back();
    }
    const std::int64_t outer = parts.front().size() / first.back();
    std::vector<double> out(static_cast<std::size_t>(outer * total));
    std::vector<std::int64_t> widths;
    widths.reserve(parts.size());
    std::int64_t off = 0;
    DType dt = parts.front().dtype();
    for (const auto& p : parts) {
        const std::int64_t w = p.shape().back();
        widths.push_back(w);
        dt = promote(dt, p.dtype());
        const auto& pv = p.values();
        for (std::int64_t o = 0; o < outer; ++o) {
            std::copy(pv.data() + o * w, pv.data() + (o + 1) * w, out.data() + o * total + off);
        }
        off += w;
    }
    auto shape = first;
    shape.back() = total;
    std::vector<const Tensor*> ins;
    ins.reserve(parts.size());
    for (const auto& p : parts) ins.push_back(&p);
    return make_result(std::move(shape), std::move(out), dt, "concat_last", ins,
                       [widths, outer, total](const std::vector<double>& g, Tape& tape,
                                              const std::vector<int>& in) {
                           std::int64_t off2 = 0;
                           for (std::size_t p = 0; p < widths.size(); ++p) {
                               const std::int64_t w = widths[p];
                               if (in[p] >= 0) {
                                   auto& dp = tape.adjoint(in[p]);
                                   for (std::int64_t o = 0; o < outer; ++o) {
                                       const double* grow = g.data() + o * total + off2;
                                       double* drow = dp.data() + o * w;
                                       for (std::int64_t i = 0; i < w; ++i) drow[i] += grow[i];
                                   }
                               }
                               off2 += w;
                           }
                       });
}

Tensor time_slice(const Tensor& x, std::int64_t t) {
    if (x.rank() != 4 || x.extent(2) != 1) {
        throw DimensionError("time_slice: need [N,C,1,W] input");
    }
    const std::int64_t n = x.extent(0), c = x.extent(1), w = x.extent(3);
    if (t < 0 || t >= w) {
        throw DimensionError("time_slice: t " + std::to_string(t) + " out of extent " +
                             std::to_string(w));
    }
    std::vector<double> out(static_cast<std::size_t>(n * c));
    const auto& xv = x.values();
    for (std::int64_t i = 0; i < n * c; ++i) {
        out[static_cast<std::size_t>(i)] = xv[static_cast<std::size_t>(i * w + t)];
    }
    return make_result({n, c}, std::move(out), x.dtype(), "time_slice", {&x},
                       [n, c, w, t](const std::vector<double>& g, Tape& tape,
                                    const std::vector<int>& in) {
                           if (in[0] < 0) return;
                           auto& dx = tape.adjoint(in[0]);
                           for (std::int64_t i = 0; i < n * c; ++i) {
                               dx[static_cast<std::size_t>(i * w + t)] +=
                                   g[static_cast<std::size_t>(i)];
                           }
                       });
}

Tensor time_stack(const std::vector<Tensor>& steps) {
    if (steps.empty()) throw ContractError("time_stack: no inputs");
    const std::int64_t n = steps.front().extent(0), c = steps.front().extent(1);
    const std::int64_t t = static_cast<std::int64_t>(steps.size());
    for (const auto& s : steps) {
        if (s.rank() != 2 || s.extent(0) != n || s.extent(1) != c) {
            throw DimensionError("time_stack: step shape mismatch");
        }
    }
    std::vector<double> out(static_cast<std::size_t>(n * c * t));
    DType dt = steps.front().dtype();
    for (std::int64_t k = 0; k < t; ++k) {
        const auto& sv = steps[static_cast<std::size_t>(k)].values();
        dt = promote(dt, steps[static_cast<std::size_t>(k)].dtype());
        for (std::int64_t i = 0; i < n * c; ++i) {
            out[static_cast<std::size_t>(i * t + k)] = sv[static_cast<std::size_t>(i)];
        }
    }
    std::vector<const Tensor*> ins;
    ins.reserve(steps.size());
    for (const auto& s : steps) ins.push_back(&s);
    return make_result({n, c, 1, t}, std::move(out), dt, "time_stack", ins,
                       [n, c, t](const std::vector<double>& g, Tape& tape,
                                 const std::vector<int>& in) {
                           for (std::int64_t k = 0; k < t; ++k) {
                               if (in[static_cast<std::size_t>(k)] < 0) continue;
                               auto& ds = tape.adjoint(in[static_cast<std::size_t>(k)]);
                               for (std::int64_t i = 0; i < n * c; ++i) {
                                   ds[static_cast<std::size_t>(i)] +=
                                       g[static_cast<std::size_t>(i * t + k)];
                               }
                           }
                       });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (auto v : x.values()) total += v;
    const std::int64_t n = x.size();
    return make_result({1}, {total}, x.dtype(), "sum", {&x},
                       [n](const std::vector<double>& g, Tape& tape, const std::vector<int>& in) {
                           if (in[0] < 0) return;
                           auto& dx = tape.adjoint(in[0]);
                           for (std::int64_t i = 0; i < n; ++i) dx[static_cast<std::size_t>(i)] += g[0];
                       });
}

Tensor mean(const Tensor& x) {
    double total = 0.0;
    for (auto v : x.values()) total += v;
    const std::int64_t n = x.size();
    return make_result({1}, {total / static_cast<double>(n)}, x.dtype(), "mean", {&x},
                       [n](const std::vector<double>& g, Tape& tape, const std::vector<int>& in) {
                           if (in[0] < 0) return;
                           auto& dx = tape.adjoint(in[0]);
                           const double gi = g[0] / static_cast<double>(n);
                           for (std::int64_t i = 0; i < n; ++i) dx[static_cast<std::size_t>(i)] += gi;
                       });
}

// --- convolution stack ---------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, Pair stride, Pair padding, int groups) {
    const ConvDims d = conv_dims(input, kernel, stride, padding, groups);
    std::vector<double> out(static_cast<std::size_t>(d.n * d.cout * d.ho * d.wo), 0.0);
    conv_forward(input.values(), kernel.values(), out, d);
    Values xs = input.storage(), ks = kernel.storage();
    return make_result({d.n, d.cout, d.ho, d.wo}, std::move(out),
                       promote(input.dtype(), kernel.dtype()), "conv2d", {&input, &kernel},
                       [xs, ks, d](const std::vector<double>& g, Tape& tape,
                                   const std::vector<int>& in) {
                           if (in[0] >= 0) conv_backward_input(g, *ks, tape.adjoint(in[0]), d);
                           if (in[1] >= 0) conv_backward_kernel(*xs, g, tape.adjoint(in[1]), d);
                       });
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, Pair stride, Pair padding,
                        Pair output_padding) {
    const ConvTDims d = convt_dims(input, kernel, stride, padding, output_padding);
    std::vector<double> out(static_cast<std::size_t>(d.n * d.cout * d.ho * d.wo), 0.0);
    convt_forward(input.values(), kernel.values(), out, d);
    Values xs = input.storage(), ks = kernel.storage();
    return make_result({d.n, d.cout, d.ho, d.wo}, std::move(out),
                       promote(input.dtype(), kernel.dtype()), "conv2d_transpose",
                       {&input, &kernel},
                       [xs, ks, d](const std::vector<double>& g, Tape& tape,
                                   const std::vector<int>& in) {
                           if (in[0] >= 0) convt_backward_input(g, *ks, tape.adjoint(in[0]), d);
                           if (in[1] >= 0) convt_backward_kernel(*xs, g, tape.adjoint(in[1]), d);
                       });
}

Tensor avg_pool2d(const Tensor& x, Pair kernel) {
    if (x.rank() != 4) throw DimensionError("avg_pool2d: input rank != 4");
    const std::int64_t kh = kernel.first, kw = kernel.second;
    if (kh < 1 || kw < 1) throw DimensionError("avg_pool2d: kernel must be >= 1");
    const std::int64_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (h % kh != 0) {
        throw DimensionError("avg_pool2d: height (axis 2) " + std::to_string(h) +
                             " not divisible by kernel " + std::to_string(kh));
    }
    if (w % kw != 0) {
        throw DimensionError("avg_pool2d: width (axis 3) " + std::to_string(w) +
                             " not divisible by kernel " + std::to_string(kw));
    }
    const std::int64_t ho = h / kh, wo = w / kw;
    const double inv = 1.0 / static_cast<double>(kh * kw);
    std::vector<double> out(static_cast<std::size_t>(n * c * ho * wo), 0.0);
    const auto& xv = x.values();
    for (std::int64_t nc = 0; nc < n * c; ++nc) {
        const double* xc = xv.data() + nc * h * w;
        double* oc = out.data() + nc * ho * wo;
        for (std::int64_t i = 0; i < ho; ++i) {
            for (std::int64_t r = 0; r < kh; ++r) {
                const double* xrow = xc + (i * kh + r) * w;
                double* orow = oc + i * wo;
                for (std::int64_t j = 0; j < wo; ++j) {
                    double cell = 0.0;
                    const double* src = xrow + j * kw;
                    for (std::int64_t s = 0; s < kw; ++s) cell += src[s];
                    orow[j] += cell;
                }
            }
        }
    }
    for (auto& v : out) v *= inv;
    return make_result(
        {n, c, ho, wo}, std::move(out), x.dtype(), "avg_pool2d", {&x},
        [n, c, h, w, kh, kw, ho, wo, inv](const std::vector<double>& g, Tape& tape,
                                          const std::vector<int>& in) {
            if (in[0] < 0) return;
            auto& dx = tape.adjoint(in[0]);
            for (std::int64_t nc = 0; nc < n * c; ++nc) {
                const double* gc = g.data() + nc * ho * wo;
                double* dxc = dx.data() + nc * h * w;
                for (std::int64_t i = 0; i < ho; ++i) {
                    for (std::int64_t r = 0; r < kh; ++r) {
                        double* dxrow = dxc + (i * kh + r) * w;
                        const double* grow = gc + i * wo;
                        for (std::int64_t j = 0; j < wo; ++j) {
                            const double gv = grow[j] * inv;
                            double* cell = dxrow + j * kw;
                            for (std::int64_t s = 0; s < kw; ++s) cell[s] += gv;
                        }
                    }
                }
            }
        });
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, BnMode mode) {
    if (x.rank() != 4) throw DimensionError("batchnorm2d: input rank != 4");
    const std::int64_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (gamma.rank() != 1 || gamma.extent(0) != c || beta.rank() != 1 || beta.extent(0) != c) {
        throw DimensionError("batchnorm2d: gamma/beta must be [C] with C = " + std::to_string(c));
    }
    if (state.channels() != c) {
        throw DimensionError("batchnorm2d: state has " + std::to_string(state.channels()) +
                             " channels, input has " + std::to_string(c));
    }
    const std::int64_t per = n * h * w;
    if (mode == BnMode::train && per < 2) {
        throw ContractError("batchnorm2d: degenerate batch (N*H*W = " + std::to_string(per) +
                            " < 2 in train mode)");
    }
    const auto& xv = x.values();
    std::vector<double> chan_mean(static_cast<std::size_t>(c), 0.0);
    auto invstd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c), 0.0);
    if (mode == BnMode::train) {
        for (std::int64_t ci = 0; ci < c; ++ci) {
            double m = 0.0;
            for (std::int64_t ni = 0; ni < n; ++ni) {
                const double* p = xv.data() + ((ni * c + ci) * h) * w;
                for (std::int64_t i = 0; i < h * w; ++i) m += p[i];
            }
            m /= static_cast<double>(per);
            double var = 0.0;
            for (std::int64_t ni = 0; ni < n; ++ni) {
                const double* p = xv.data() + ((ni * c + ci) * h) * w;
                for (std::int64_t i = 0; i < h * w; ++i) {
                    const double dv = p[i] - m;
                    var += dv * dv;
                }
            }
            var /= static_cast<double>(per);
            chan_mean[static_cast<std::size_t>(ci)] = m;
            (*invstd)[static_cast<std::size_t>(ci)] = 1.0 / std::sqrt(var + state.eps);
            const double unbiased = var * static_cast<double>(per) / static_cast<double>(per - 1);
            state.running_mean[static_cast<std::size_t>(ci)] =
                (1.0 - state.momentum) * state.running_mean[static_cast<std::size_t>(ci)] +
                state.momentum * m;
            state.running_var[static_cast<std::size_t>(ci)] =
                (1.0 - state.momentum) * state.running_var[static_cast<std::size_t>(ci)] +
                state.momentum * unbiased;
        }
    } else {
        for (std::int64_t ci = 0; ci < c; ++ci) {
            chan_mean[static_cast<std::size_t>(ci)] =
                state.running_mean[static_cast<std::size_t>(ci)];
            (*invstd)[static_cast<std::size_t>(ci)] =
                1.0 / std::sqrt(state.running_var[static_cast<std::size_t>(ci)] + state.eps);
        }
    }
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    std::vector<double> out(static_cast<std::size_t>(x.size()));
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.size()));
    for (std::int64_t ni = 0; ni < n; ++ni) {
        for (std::int64_t ci = 0; ci < c; ++ci) {
            const double m = chan_mean[static_cast<std::size_t>(ci)];
            const double is = (*invstd)[static_cast<std::size_t>(ci)];
            const double gg = gv[static_cast<std::size_t>(ci)];
            const double bb = bv[static_cast<std::size_t>(ci)];
            const std::int64_t base = ((ni * c + ci) * h) * w;
            for (std::int64_t i = 0; i < h * w; ++i) {
                const double xh = (xv[static_cast<std::size_t>(base + i)] - m) * is;
                (*xhat)[static_cast<std::size_t>(base + i)] = xh;
                out[static_cast<std::size_t>(base + i)] = gg * xh + bb;
            }
        }
    }
    auto gamma_vals = gamma.storage();
    const bool train = (mode == BnMode::train);
    return make_result(
        x.shape(), std::move(out), promote(promote(x.dtype(), gamma.dtype()), beta.dtype()),
        "batchnorm2d", {&x, &gamma, &beta},
        [xhat, invstd, gamma_vals, train, n, c, h, w, per](const std::vector<double>& g,
                                                           Tape& tape,
                                                           const std::vector<int>& in) {
            // per channel: sums over (N,H,W)
            std::vector<double> sum_g(static_cast<std::size_t>(c), 0.0);
            std::vector<double> sum_gx(static_cast<std::size_t>(c), 0.0);
            for (std::int64_t ni = 0; ni < n; ++ni) {
                for (std::int64_t ci = 0; ci < c; ++ci) {
                    const std::int64_t base = ((ni * c + ci) * h) * w;
                    double sg = 0.0, sgx = 0.0;
                    for (std::int64_t i = 0; i < h * w; ++i) {
                        const double gi = g[static_cast<std::size_t>(base + i)];
                        sg += gi;
                        sgx += gi * (*xhat)[static_cast<std::size_t>(base + i)];
                    }
                    sum_g[static_cast<std::size_t>(ci)] += sg;
                    sum_gx[static_cast<std::size_t>(ci)] += sgx;
                }
            }
            if (in[1] >= 0) {
                auto& dgamma = tape.adjoint(in[1]);
                for (std::int64_t ci = 0; ci < c; ++ci) {
                    dgamma[static_cast<std::size_t>(ci)] += sum_gx[static_cast<std::size_t>(ci)];
                }
            }
            if (in[2] >= 0) {
                auto& dbeta = tape.adjoint(in[2]);
                for (std::int64_t ci = 0; ci < c; ++ci) {
                    dbeta[static_cast<std::size_t>(ci)] += sum_g[static_cast<std::size_t>(ci)];
                }
            }
            if (in[0] >= 0) {
                auto& dx = tape.adjoint(in[0]);
                const double invper = 1.0 / static_cast<double>(per);
                for (std::int64_t ni = 0; ni < n; ++ni) {
                    for (std::int64_t ci = 0; ci < c; ++ci) {
                        const double gg = (*gamma_vals)[static_cast<std::size_t>(ci)];
                        const double is = (*invstd)[static_cast<std::size_t>(ci)];
                        const double mg = sum_g[static_cast<std::size_t>(ci)] * invper;
                        const double mgx = sum_gx[static_cast<std::size_t>(ci)] * invper;
                        const std::int64_t base = ((ni * c + ci) * h) * w;
                        if (train) {
                            for (std::int64_t i = 0; i < h * w; ++i) {
                                const double gi = g[static_cast<std::size_t>(base + i)];
                                const double xh = (*xhat)[static_cast<std::size_t>(base + i)];
                                dx[static_cast<std::size_t>(base + i)] +=
                                    gg * is * (gi - mg - xh * mgx);
                            }
                        } else {
                            for (std::int64_t i = 0; i < h * w; ++i) {
                                dx[static_cast<std::size_t>(base + i)] +=
                                    gg * is * g[static_cast<std::size_t>(base + i)];
                            }
                        }
                    }
                }
            }
        });
}

// --- initialization / checking ---------------------------------------------------

Tensor glorot_init(const std::vector<std::int64_t>& shape, std::uint64_t seed, DType dtype,
                   int groups) {
    double fan_in = 0.0, fan_out = 0.0;
    switch (shape.size()) {
        case 1:
            fan_in = fan_out = static_cast<double>(shape[0]);
            break;
        case 2:
            fan_in = static_cast<double>(shape[0]);
            fan_out = static_cast<double>(shape[1]);
            break;
        case 4: {
            const double rf = static_cast<double>(shape[2] * shape[3]);
            fan_in = static_cast<double>(shape[1]) * rf;
            fan_out = static_cast<double>(shape[0]) / static_cast<double>(groups) * rf;
            break;
        }
        default:
            throw ContractError("glorot_init: no fan rule for rank " +
                                std::to_string(shape.size()));
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(seed);
    const std::int64_t n = detail::shape_size(shape);
    std::vector<double> vals(static_cast<std::size_t>(n));
    for (auto& v : vals) v = rng.uniform(-bound, bound);
    return Tensor(shape, std::move(vals), dtype);
}

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  const std::vector<Tensor>& inputs, double eps) {
    for (const auto& t : inputs) {
        if (t.dtype() != DType::f64) {
            throw ContractError("grad_check: inputs must be f64");
        }
    }
    std::vector<std::vector<double>> analytic;
    try {
        Tape tape;
        std::vector<Tensor> watched;
        watched.reserve(inputs.size());
        for (const auto& t : inputs) watched.push_back(tape.watch(t));
        Tensor out = f(watched);
        if (out.size() != 1) throw ContractError("grad_check: f must be scalar-valued");
        tape.backward(out);
        for (const auto& wt : watched) analytic.push_back(tape.grad(wt).values());
    } catch (const NumericError& e) {
        throw ContractError(std::string("grad_check: non-finite output at base point (") +
                            e.what() + ")");
    }
    double max_err = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto base = inputs[i].values();
        for (std::size_t j = 0; j < base.size(); ++j) {
            auto eval_at = [&](double v) {
                std::vector<Tensor> probe = inputs;
                auto vals = base;
                vals[j] = v;
                probe[i] = Tensor(inputs[i].shape(), std::move(vals), DType::f64);
                double y;
                try {
                    y = f(probe).item();
                } catch (const NumericError& e) {
                    throw ContractError("grad_check: non-finite output at input " +
                                        std::to_string(i) + " coordinate " + std::to_string(j) +
                                        " (" + e.what() + ")");
                }
                if (!std::isfinite(y)) {
                    throw ContractError("grad_check: non-finite output at input " +
                                        std::to_string(i) + " coordinate " + std::to_string(j));
                }
                return y;
            };
            const double numeric = (eval_at(base[j] + eps) - eval_at(base[j] - eps)) / (2.0 * eps);
            const double err =
                std::abs(analytic[i][j] - numeric) / std::max(1.0, std::abs(numeric));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

} // namespace fusenet
