#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fusenet/ops.hpp"
#include "fusenet/optim.hpp"
#include "fusenet/rng.hpp"
#include "fusenet/tensor.hpp"

using namespace fusenet;

namespace {

// Independent nested-loop cross-correlation. Bounds-checked per element, no
// shared code with the library kernels.
Tensor conv_oracle(const Tensor& x, const Tensor& k, Pair stride, Pair pad, int groups) {
    const auto n = x.extent(0), cin = x.extent(1), h = x.extent(2), w = x.extent(3);
    const auto cout = k.extent(0), kh = k.extent(2), kw = k.extent(3);
    const auto cin_g = cin / groups, cout_g = cout / groups;
    const auto ho = (h + 2 * pad.first - kh) / stride.first + 1;
    const auto wo = (w + 2 * pad.second - kw) / stride.second + 1;
    std::vector<double> out(static_cast<std::size_t>(n * cout * ho * wo), 0.0);
    for (std::int64_t ni = 0; ni < n; ++ni)
        for (std::int64_t co = 0; co < cout; ++co)
            for (std::int64_t i = 0; i < ho; ++i)
                for (std::int64_t j = 0; j < wo; ++j) {
                    const std::int64_t g = co / cout_g;
                    double acc = 0.0;
                    for (std::int64_t cg = 0; cg < cin_g; ++cg)
                        for (std::int64_t r = 0; r < kh; ++r)
                            for (std::int64_t s = 0; s < kw; ++s) {
                                const std::int64_t hi = i * stride.first + r - pad.first;
                                const std::int64_t wi = j * stride.second + s - pad.second;
                                if (hi < 0 || hi >= h || wi < 0 || wi >= w) continue;
                                acc += x.at({ni, g * cin_g + cg, hi, wi}) *
                                       k.at({co, cg, r, s});
                            }
                    out[static_cast<std::size_t>(((ni * cout + co) * ho + i) * wo + j)] = acc;
                }
    return Tensor({n, cout, ho, wo}, std::move(out));
}

Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
    const auto n = a.extent(0), f = a.extent(1), g = b.extent(1);
    std::vector<double> out(static_cast<std::size_t>(n * g), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t k = 0; k < g; ++k) {
            double acc = 0.0;
            for (std::int64_t j = 0; j < f; ++j) acc += a.at({i, j}) * b.at({j, k});
            out[static_cast<std::size_t>(i * g + k)] = acc;
        }
    return Tensor({n, g}, std::move(out));
}

Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng, double scl = 1.0) {
    std::vector<double> vals(static_cast<std::size_t>(detail::shape_size(shape)));
    for (auto& v : vals) v = scl * rng.normal();
    return Tensor(std::move(shape), std::move(vals));
}

double dot(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("tensor basics and invariants") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.at({1, 2}) == 6);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
    CHECK_THROWS_AS(Tensor({0, 2}, {}), DimensionError);
    CHECK_THROWS_AS(t.item(), ContractError);
    CHECK(Tensor::scalar(4.5).item() == 4.5);

    // f32 storage rounds through float
    Tensor f({1}, {0.1}, DType::f32);
    CHECK(f.item() == doctest::Approx(static_cast<double>(0.1f)).epsilon(1e-12));
    CHECK(f.item() != 0.1);

    // non-finite results are rejected
    CHECK_THROWS_AS(log_values(Tensor({1}, {0.0})), NumericError);
}

TEST_CASE("conv2d: worked 2x2 example and identity kernels") {
    // [[1,2],[3,4]] ** [[1,0],[0,1]] -> [[5]]
    Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor k({1, 1, 2, 2}, {1, 0, 0, 1});
    Tensor y = conv2d(x, k);
    CHECK(y.shape() == std::vector<std::int64_t>{1, 1, 1, 1});
    CHECK(y.item() == 5.0);

    // depthwise 1x1 kernel of value 1 is the identity
    Rng rng(7);
    Tensor z = random_tensor({2, 3, 4, 5}, rng);
    Tensor ones({3, 1, 1, 1}, {1, 1, 1});
    Tensor id = conv2d(z, ones, {1, 1}, {0, 0}, 3);
    CHECK(max_abs_diff(id, z) == 0.0);
}

TEST_CASE("conv2d: padded temporal-filter shape map") {
    // 32-channel row of 384 samples, dense filter bank of 16 kernels of
    // length 192 (half the width), pad 96 -> [1,16,1,385]
    Rng rng(11);
    Tensor x = random_tensor({1, 32, 1, 384}, rng);
    Tensor k = random_tensor({16, 32, 1, 192}, rng, 0.05);
    Tensor y = conv2d(x, k, {1, 1}, {0, 96});
    CHECK(y.shape() == std::vector<std::int64_t>{1, 16, 1, 385});
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 8; ++trial) {
        const int groups = (trial % 2 == 0) ? 1 : 2;
        Tensor x = random_tensor({2, 4, 5, 6}, rng);
        Tensor k = random_tensor({4, 4 / groups, 2, 3}, rng);
        const Pair stride{1 + trial % 2, 1 + trial % 3};
        const Pair pad{trial % 2, trial % 3};
        Tensor got = conv2d(x, k, stride, pad, groups);
        Tensor want = conv_oracle(x, k, stride, pad, groups);
        CHECK(max_abs_diff(got, want) < 1e-12);
    }
}

TEST_CASE("conv2d with groups=Cin equals per-channel independent conv") {
    Rng rng(5);
    Tensor x = random_tensor({1, 3, 4, 7}, rng);
    Tensor k = random_tensor({3, 1, 2, 3}, rng);
    Tensor grouped = conv2d(x, k, {1, 1}, {0, 0}, 3);
    for (std::int64_t c = 0; c < 3; ++c) {
        std::vector<double> xc, kc;
        for (std::int64_t i = 0; i < 4 * 7; ++i) xc.push_back(x[c * 4 * 7 + i]);
        for (std::int64_t i = 0; i < 2 * 3; ++i) kc.push_back(k[c * 2 * 3 + i]);
        Tensor single = conv2d(Tensor({1, 1, 4, 7}, xc), Tensor({1, 1, 2, 3}, kc));
        for (std::int64_t i = 0; i < single.size(); ++i) {
            CHECK(grouped[c * single.size() + i] == doctest::Approx(single[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("conv2d dimension errors name the offending axes") {
    Tensor x({1, 3, 4, 4}, std::vector<double>(48, 0.0));
    Tensor k({2, 2, 2, 2}, std::vector<double>(16, 0.0));
    CHECK_THROWS_WITH_AS(conv2d(x, k), doctest::Contains("kernel axis 1"), DimensionError);
    Tensor k2({2, 3, 9, 2}, std::vector<double>(108, 0.0));
    CHECK_THROWS_WITH_AS(conv2d(x, k2), doctest::Contains("axis 2"), DimensionError);
    CHECK_THROWS_AS(conv2d(x, Tensor({2, 1, 2, 2}, std::vector<double>(8, 0.0)), {1, 1}, {0, 0}, 2),
                    DimensionError);
}

TEST_CASE("conv2d_transpose: scatter example, identity, adjoint and round-trip") {
    // [[5]] through the adjoint of the identity-diagonal kernel
    Tensor y({1, 1, 1, 1}, {5});
    Tensor k({1, 1, 2, 2}, {1, 0, 0, 1});
    Tensor up = conv2d_transpose(y, k);
    CHECK(up.shape() == std::vector<std::int64_t>{1, 1, 2, 2});
    CHECK(up[0] == 5.0);
    CHECK(up[1] == 0.0);
    CHECK(up[2] == 0.0);
    CHECK(up[3] == 5.0);

    // 1x1 kernel of value 1 is the identity
    Rng rng(3);
    Tensor z = random_tensor({2, 1, 3, 4}, rng);
    Tensor one({1, 1, 1, 1}, {1});
    CHECK(max_abs_diff(conv2d_transpose(z, one), z) == 0.0);

    // adjoint identity: <conv(x,k), y> == <x, convT(y,k)> with matched config
    for (int trial = 0; trial < 6; ++trial) {
        const Pair stride{1 + trial % 2, 1 + trial % 3};
        const Pair pad{trial % 2, 1};
        Tensor x = random_tensor({2, 3, 6, 8}, rng);
        Tensor kk = random_tensor({4, 3, 2, 3}, rng);
        Tensor fwd = conv2d(x, kk, stride, pad);
        Tensor probe = random_tensor(fwd.shape(), rng);
        const std::int64_t oph = x.extent(2) - ((fwd.extent(2) - 1) * stride.first +
                                                kk.extent(2) - 2 * pad.first);
        const std::int64_t opw = x.extent(3) - ((fwd.extent(3) - 1) * stride.second +
                                                kk.extent(3) - 2 * pad.second);
        Tensor back = conv2d_transpose(probe, kk, stride, pad,
                                       {static_cast<int>(oph), static_cast<int>(opw)});
        CHECK(back.shape() == x.shape());
        CHECK(dot(fwd, probe) == doctest::Approx(dot(x, back)).epsilon(1e-10));
    }
}

TEST_CASE("avg_pool2d and its divisibility contract") {
    Tensor x({1, 1, 1, 4}, {1, 2, 3, 4});
    Tensor p = avg_pool2d(x, {1, 2});
    CHECK(p.shape() == std::vector<std::int64_t>{1, 1, 1, 2});
    CHECK(p[0] == 1.5);
    CHECK(p[1] == 3.5);
    CHECK_THROWS_AS(avg_pool2d(x, {1, 3}), DimensionError);
}

TEST_CASE("batchnorm2d: zero-variance, gamma=0, and normalization moments") {
    // constant channel -> zeros (up to eps)
    {
        BatchNormState st(1);
        Tensor x = Tensor::full({4, 1, 1, 3}, 2.5);
        Tensor g({1}, {1.0}), b({1}, {0.0});
        Tensor y = batchnorm2d(x, g, b, st, BnMode::train);
        for (std::int64_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i]) < 1e-9);
    }
    // gamma = 0 -> output equals broadcast beta
    {
        BatchNormState st(2);
        Rng rng(9);
        Tensor x = random_tensor({3, 2, 2, 2}, rng);
        Tensor g({2}, {0.0, 0.0}), b({2}, {1.5, -0.5});
        Tensor y = batchnorm2d(x, g, b, st, BnMode::train);
        for (std::int64_t n = 0; n < 3; ++n)
            for (std::int64_t c = 0; c < 2; ++c)
                for (std::int64_t i = 0; i < 4; ++i)
                    CHECK(y[(n * 2 + c) * 4 + i] == (c == 0 ? 1.5 : -0.5));
    }
    // random input, gamma=1, beta=0 -> per-channel mean ~0, var ~1 (direct moments)
    {
        BatchNormState st(3);
        Rng rng(123);
        Tensor x = random_tensor({8, 3, 4, 5}, rng, 2.0);
        Tensor g({3}, {1, 1, 1}), b({3}, {0, 0, 0});
        Tensor y = batchnorm2d(x, g, b, st, BnMode::train);
        const std::int64_t per = 8 * 4 * 5;
        for (std::int64_t c = 0; c < 3; ++c) {
            double m = 0.0, v = 0.0;
            for (std::int64_t n = 0; n < 8; ++n)
                for (std::int64_t i = 0; i < 20; ++i) m += y[(n * 3 + c) * 20 + i];
            m /= static_cast<double>(per);
            for (std::int64_t n = 0; n < 8; ++n)
                for (std::int64_t i = 0; i < 20; ++i) {
                    const double d = y[(n * 3 + c) * 20 + i] - m;
                    v += d * d;
                }
            v /= static_cast<double>(per);
            CHECK(std::abs(m) < 1e-6);
            CHECK(std::abs(v - 1.0) < 1e-4); // eps=1e-5 shifts variance slightly below 1
        }
    }
    // degenerate train batch
    {
        BatchNormState st(1);
        Tensor x({1, 1, 1, 1}, {1.0});
        Tensor g({1}, {1.0}), b({1}, {0.0});
        CHECK_THROWS_AS(batchnorm2d(x, g, b, st, BnMode::train), ContractError);
        CHECK_NOTHROW(batchnorm2d(x, g, b, st, BnMode::eval));
    }
}

TEST_CASE("activations: fixed points and the tanh identity oracle") {
    Tensor zero({1}, {0.0});
    CHECK(activation(zero, Act::sigmoid).item() == 0.5);

    Tensor neg({1}, {-40.0});
    CHECK(activation(neg, Act::elu).item() == doctest::Approx(-1.0).epsilon(1e-12));
    Tensor pos({3}, {0.0, 1.25, 7.0});
    Tensor e = activation(pos, Act::elu);
    CHECK(e[0] == 0.0);
    CHECK(e[1] == 1.25);
    CHECK(e[2] == 7.0);

    // tanh(x) vs the exp identity (e^{2x}-1)/(e^{2x}+1)
    const double x = 0.5;
    const double want = (std::exp(2 * x) - 1.0) / (std::exp(2 * x) + 1.0);
    CHECK(activation(Tensor({1}, {x}), Act::tanh).item() == doctest::Approx(want).epsilon(1e-15));
    CHECK(activation(Tensor({1}, {x}), Act::tanh).item() ==
          doctest::Approx(0.46211715726000974).epsilon(1e-12));
}

TEST_CASE("affine: identity, 1x1 case, and the triple-loop oracle") {
    Tensor x({2, 2}, {1, 2, 3, 4});
    Tensor id({2, 2}, {1, 0, 0, 1});
    Tensor zb({2}, {0, 0});
    CHECK(max_abs_diff(affine(x, id, zb), x) == 0.0);

    Tensor x1({1, 1}, {2});
    Tensor w1({1, 1}, {3});
    Tensor b1({1}, {1});
    CHECK(affine(x1, w1, b1).item() == 7.0);

    Rng rng(77);
    Tensor a = random_tensor({5, 7}, rng);
    Tensor w = random_tensor({7, 3}, rng);
    Tensor b({3}, {0.5, -1.0, 2.0});
    Tensor got = affine(a, w, b);
    Tensor mm = matmul_oracle(a, w);
    for (std::int64_t i = 0; i < 5; ++i)
        for (std::int64_t j = 0; j < 3; ++j)
            CHECK(got.at({i, j}) == doctest::Approx(mm.at({i, j}) + b[j]).epsilon(1e-12));

    CHECK_THROWS_AS(affine(a, random_tensor({5, 3}, rng), b), DimensionError);
}

TEST_CASE("backward: leaf gradients, fan-out accumulation, contract errors") {
    Tensor x({3}, {1.0, -2.0, 0.5});
    {
        Tape tape;
        Tensor wx = tape.watch(x);
        Tensor loss = sum(wx);
        tape.backward(loss);
        Tensor g = tape.grad(wx);
        for (std::int64_t i = 0; i < 3; ++i) CHECK(g[i] == 1.0);
        CHECK(wx.has_grad());
    }
    {
        Tensor x2({2}, {1.0, 2.0});
        Tape tape;
        Tensor wx = tape.watch(x2);
        Tensor loss = sum(mul(wx, wx));
        tape.backward(loss);
        Tensor g = tape.grad(wx);
        CHECK(g[0] == 2.0);
        CHECK(g[1] == 4.0);
    }
    { // d(sum(x)+sum(x))/dx = 2 exactly
        Tape tape;
        Tensor wx = tape.watch(x);
        Tensor loss = add(sum(wx), sum(wx));
        tape.backward(loss);
        Tensor g = tape.grad(wx);
        for (std::int64_t i = 0; i < 3; ++i) CHECK(g[i] == 2.0);
    }
    { // non-participating leaves receive zero
        Tensor other({2}, {5.0, 6.0});
        Tape tape;
        Tensor wx = tape.watch(x);
        Tensor wo = tape.watch(other);
        tape.backward(sum(wx));
        Tensor g = tape.grad(wo);
        CHECK(g[0] == 0.0);
        CHECK(g[1] == 0.0);
    }
    { // non-scalar loss rejected
        Tape tape;
        Tensor wx = tape.watch(x);
        Tensor y = mul(wx, wx);
        CHECK_THROWS_AS(tape.backward(y), ContractError);
    }
    { // loss from another tape rejected
        Tensor loss_elsewhere;
        {
            Tape inner;
            Tensor wx = inner.watch(x);
            loss_elsewhere = sum(wx);
            inner.backward(loss_elsewhere);
        }
        Tape tape;
        CHECK_THROWS_AS(tape.backward(loss_elsewhere), ContractError);
    }
}

TEST_CASE("grad_check: linear, sigmoid chain, composite conv+BN+ELU") {
    auto linear = [](const std::vector<Tensor>& in) {
        return sum(scale(in[0], 3.0));
    };
    Rng rng(31);
    CHECK(grad_check(linear, {random_tensor({4}, rng)}) < 1e-10);

    auto chain = [](const std::vector<Tensor>& in) {
        return mean(activation(affine(in[0], in[1], in[2]), Act::sigmoid));
    };
    CHECK(grad_check(chain, {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng),
                             random_tensor({2}, rng)}) < 1e-6);

    // composite conv -> BN -> ELU -> pool block against central differences
    auto block = [](const std::vector<Tensor>& in) {
        BatchNormState st(2);
        Tensor c = conv2d(in[0], in[1], {1, 1}, {0, 1});
        Tensor b = batchnorm2d(c, in[2], in[3], st, BnMode::train);
        Tensor e = activation(b, Act::elu);
        return mean(avg_pool2d(e, {1, 2}));
    };
    CHECK(grad_check(block, {random_tensor({2, 1, 3, 8}, rng), random_tensor({2, 1, 2, 3}, rng),
                             random_tensor({2}, rng, 0.5), random_tensor({2}, rng, 0.5)},
                     1e-5) < 1e-4);

    auto bad = [](const std::vector<Tensor>& in) { return log_values(sum(in[0])); };
    CHECK_THROWS_AS(grad_check(bad, {Tensor({2}, {1e-7, -1e-7})}), ContractError);
}

TEST_CASE("per-op gradient property sweep (small extents, many seeds)") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        Tensor a = random_tensor({2, 5}, rng);
        Tensor b = random_tensor({2, 5}, rng);
        CHECK(grad_check([](const std::vector<Tensor>& in) {
                  return sum(mul(in[0], in[1]));
              }, {a, b}) < 1e-4);
        CHECK(grad_check([](const std::vector<Tensor>& in) {
                  return mean(activation(in[0], Act::tanh));
              }, {a}) < 1e-4);
        CHECK(grad_check([](const std::vector<Tensor>& in) {
                  return sum(narrow_last(concat_last({in[0], in[1]}), 2, 6));
              }, {a, b}) < 1e-4);
        Tensor x4 = random_tensor({1, 2, 1, 6}, rng);
        CHECK(grad_check([](const std::vector<Tensor>& in) {
                  Tensor s0 = time_slice(in[0], 0);
                  Tensor s3 = time_slice(in[0], 3);
                  return sum(time_stack({s0, s3, mul(s0, s3)}));
              }, {x4}) < 1e-4);
        Tensor xt = random_tensor({1, 2, 2, 3}, rng);
        Tensor kt = random_tensor({2, 3, 2, 2}, rng);
        CHECK(grad_check([](const std::vector<Tensor>& in) {
                  return mean(conv2d_transpose(in[0], in[1], {1, 2}, {0, 1}));
              }, {xt, kt}) < 1e-4);
    }
}

TEST_CASE("glorot_init: bound, determinism, moments") {
    const std::vector<std::int64_t> shape{40, 50}; // fan sum 90
    const double bound = std::sqrt(6.0 / 90.0);
    Tensor t = glorot_init(shape, 99);
    for (std::int64_t i = 0; i < t.size(); ++i) {
        CHECK(t[i] < bound);
        CHECK(t[i] > -bound);
    }
    Tensor t2 = glorot_init(shape, 99);
    CHECK(max_abs_diff(t, t2) == 0.0);
    Tensor t3 = glorot_init(shape, 100);
    CHECK(max_abs_diff(t, t3) > 0.0);

    // sample mean of 1e5 draws within 3 standard errors of zero
    Tensor big = glorot_init({100000}, 7); // rank-1: fan_in = fan_out = n
    const double b1 = std::sqrt(6.0 / 200000.0);
    double m = 0.0;
    for (std::int64_t i = 0; i < big.size(); ++i) m += big[i];
    m /= static_cast<double>(big.size());
    const double se = b1 / std::sqrt(3.0) / std::sqrt(static_cast<double>(big.size()));
    CHECK(std::abs(m) < 3.0 * se);

    // 4-d fan rule with groups: fan_in = 1*2*3, fan_out = 8/4*2*3
    Tensor dw = glorot_init({8, 1, 2, 3}, 5, DType::f64, 4);
    const double b4 = std::sqrt(6.0 / (6.0 + 12.0));
    for (std::int64_t i = 0; i < dw.size(); ++i) CHECK(std::abs(dw[i]) < b4);
}

TEST_CASE("adam_step: no-op on zero grad, hand-checked first step, determinism") {
    Tensor p({2}, {1.0, -1.0});
    {
        Tensor q = p;
        AdamState st;
        adam_step({&q}, {Tensor::zeros({2})}, st, 0.001);
        CHECK(q[0] == 1.0);
        CHECK(q[1] == -1.0);
        CHECK(st.step == 1);
    }
    {
        // g=1, lr=0.001, fresh state: mhat=1, vhat=1 -> step of ~0.001
        Tensor q = p;
        AdamState st;
        adam_step({&q}, {Tensor::full({2}, 1.0)}, st, 0.001);
        CHECK(q[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-9));
        CHECK(q[1] == doctest::Approx(-1.0 - 0.001).epsilon(1e-9));
    }
    {
        Tensor q1 = p, q2 = p;
        AdamState s1, s2;
        Tensor g({2}, {0.3, -0.7});
        adam_step({&q1}, {g}, s1, 0.01);
        adam_step({&q1}, {g}, s1, 0.01);
        adam_step({&q2}, {g}, s2, 0.01);
        adam_step({&q2}, {g}, s2, 0.01);
        CHECK(max_abs_diff(q1, q2) == 0.0);
        CHECK(s1.step == 2);
    }
    {
        Tensor q = p;
        AdamState st;
        CHECK_THROWS_AS(adam_step({&q}, {Tensor::zeros({3})}, st, 0.001), DimensionError);
    }
}

TEST_CASE("tensor serialization round-trips and rejects corruption") {
    Rng rng(13);
    Tensor t = random_tensor({3, 4, 2}, rng);
    std::stringstream buf;
    write_tensor(buf, t);
    Tensor back = read_tensor(buf);
    CHECK(back.shape() == t.shape());
    CHECK(back.dtype() == DType::f64);
    CHECK(max_abs_diff(back, t) == 0.0);

    Tensor tf = t.to(DType::f32);
    std::stringstream buf32;
    write_tensor(buf32, tf);
    Tensor back32 = read_tensor(buf32);
    CHECK(back32.dtype() == DType::f32);
    CHECK(max_abs_diff(back32, tf) == 0.0); // f32 values stored exactly

    std::string bytes = buf.str();
    bytes[0] = 'X';
    std::stringstream bad(bytes);
    CHECK_THROWS_AS(read_tensor(bad), DataError);

    std::stringstream trunc(buf.str().substr(0, 20));
    CHECK_THROWS_AS(read_tensor(trunc), DataError);
}

TEST_CASE("f32 mode propagates and rounds op results") {
    Tensor a({2}, {0.1, 0.2}, DType::f32);
    Tensor b({2}, {0.3, 0.4}, DType::f32);
    Tensor c = add(a, b);
    CHECK(c.dtype() == DType::f32);
    CHECK(c[0] == static_cast<double>(0.1f + 0.3f));
    Tensor d = add(a, b.to(DType::f64));
    CHECK(d.dtype() == DType::f64);
}
