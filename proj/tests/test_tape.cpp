#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dmfuse/tape.hpp"
#include "test_util.hpp"

using namespace dmfuse;
namespace ops = dmfuse::ad;
namespace tu = dmfuse::testutil;
using ops::Value;

namespace {

constexpr double kTol = 1e-5;  // central differences at eps 1e-6, 64-bit

double input_err(Tensor t, const std::function<Value(const Value&)>& graph) {
    return tu::max_input_grad_rel_err(t, graph, 1e-6, 32);
}

}  // namespace

TEST_CASE("elementwise op gradients") {
    const Tensor a = tu::random_tensor(2, 3, 4, 1, -1.0, 1.0);
    const Tensor b = tu::random_tensor(2, 3, 4, 2, 0.5, 1.5);

    CHECK(input_err(a, [&](const Value& x) { return ops::mean(ops::mul(ops::add(x, ops::constant(b)), x)); }) < kTol);
    CHECK(input_err(a, [&](const Value& x) { return ops::mean(ops::sub(ops::constant(b), x)); }) < kTol);
    CHECK(input_err(a, [&](const Value& x) { return ops::mean(ops::div(x, ops::constant(b))); }) < kTol);
    CHECK(input_err(b, [&](const Value& x) { return ops::mean(ops::div(ops::constant(a), x)); }) < kTol);
    CHECK(input_err(a, [&](const Value& x) { return ops::mean(ops::sigmoid(x)); }) < kTol);
    CHECK(input_err(a, [&](const Value& x) { return ops::mean(ops::silu(x)); }) < kTol);
    CHECK(input_err(a, [&](const Value& x) { return ops::sum(ops::scale(ops::add_scalar(x, 0.3), -1.7)); }) < kTol);
    CHECK(input_err(a, [&](const Value& x) { return ops::mean(ops::mul_const(ops::sub_const(x, b), b)); }) < kTol);
    // |x| away from the kink
    Tensor shifted = a;
    for (double& v : shifted.v) v += (v >= 0 ? 0.5 : -0.5);
    CHECK(input_err(shifted, [&](const Value& x) { return ops::mean(ops::abs(x)); }) < kTol);
    // hypot away from the origin
    Tensor pos = tu::random_tensor(2, 3, 4, 3, 0.5, 1.5);
    CHECK(input_err(pos, [&](const Value& x) { return ops::mean(ops::hypot(x, ops::constant(b))); }) < kTol);
}

TEST_CASE("broadcast op gradients") {
    const Tensor x = tu::random_tensor(3, 4, 5, 4, -1.0, 1.0);
    Tensor cgate = tu::random_tensor(3, 1, 1, 5, 0.2, 0.8);
    Tensor sgate = tu::random_tensor(1, 4, 5, 6, 0.2, 0.8);
    Tensor sc = tu::random_tensor(1, 1, 1, 7, 0.5, 1.5);

    CHECK(input_err(x, [&](const Value& v) { return ops::mean(ops::mul_chan(v, ops::constant(cgate))); }) < kTol);
    CHECK(input_err(cgate, [&](const Value& g) { return ops::mean(ops::mul_chan(ops::constant(x), g)); }) < kTol);
    CHECK(input_err(x, [&](const Value& v) { return ops::mean(ops::mul_spatial(v, ops::constant(sgate))); }) < kTol);
    CHECK(input_err(sgate, [&](const Value& g) { return ops::mean(ops::mul_spatial(ops::constant(x), g)); }) < kTol);
    CHECK(input_err(cgate, [&](const Value& b) { return ops::mean(ops::add_chan_bias(ops::constant(x), b)); }) < kTol);
    CHECK(input_err(sc, [&](const Value& s) { return ops::mean(ops::mul_scalar_node(ops::constant(x), s)); }) < kTol);
    CHECK(input_err(cgate, [&](const Value& g) { return ops::mean(ops::mul(ops::expand_chan(g, 4, 5), ops::constant(x))); }) < kTol);
    CHECK(input_err(sgate, [&](const Value& g) { return ops::mean(ops::mul(ops::expand_spatial(g, 3), ops::constant(x))); }) < kTol);
}

TEST_CASE("reduction and structure op gradients") {
    const Tensor x = tu::random_tensor(4, 6, 6, 8, -1.0, 1.0);
    const Tensor w = tu::random_tensor(4, 6, 6, 9, 0.1, 1.0);

    CHECK(input_err(x, [&](const Value& v) { return ops::mean(ops::mul(ops::expand_chan(ops::global_avg_pool(v), 6, 6), ops::constant(w))); }) < kTol);
    CHECK(input_err(x, [&](const Value& v) {
              return ops::mean(ops::mul(ops::expand_spatial(ops::channel_mean(v), 4), ops::constant(w)));
          }) < kTol);
    CHECK(input_err(x, [&](const Value& v) {
              return ops::mean(ops::mul(ops::expand_spatial(ops::channel_max(v), 4), ops::constant(w)));
          }) < kTol);
    CHECK(input_err(x, [&](const Value& v) {
              return ops::mean(ops::mul(ops::concat({v, ops::constant(w)}), ops::concat({ops::constant(w), v})));
          }) < kTol);
    CHECK(input_err(x, [&](const Value& v) { return ops::mean(ops::mul(ops::channel_shuffle(v, 2), ops::constant(w))); }) < kTol);
    CHECK(input_err(x, [&](const Value& v) { return ops::mean(ops::crop(v, 1, 2, 3, 3)); }) < kTol);
    CHECK(input_err(x, [&](const Value& v) { return ops::mean(ops::mul(ops::upsample_bilinear2(v), ops::upsample_bilinear2(ops::constant(w)))); }) < kTol);
}

TEST_CASE("channel_shuffle is the group-transpose permutation") {
    SUBCASE("groups=1 is the identity") {
        const Tensor x = tu::random_tensor(6, 2, 2, 10);
        const Value out = ops::channel_shuffle(ops::constant(x), 1);
        CHECK(out->val.v == x.v);
    }
    SUBCASE("C=4, groups=2 maps channel order to (0,2,1,3)") {
        Tensor x(4, 1, 1);
        for (int c = 0; c < 4; ++c) x.v[c] = c;
        const Value out = ops::channel_shuffle(ops::constant(x), 2);
        CHECK(out->val.v == std::vector<double>{0, 2, 1, 3});
    }
    SUBCASE("shuffling with g then C/g restores the order") {
        const Tensor x = tu::random_tensor(12, 3, 3, 11);
        const Value once = ops::channel_shuffle(ops::constant(x), 3);
        const Value twice = ops::channel_shuffle(once, 4);
        CHECK(twice->val.v == x.v);
    }
    SUBCASE("per-site multiset of values is preserved") {
        const Tensor x = tu::random_tensor(8, 2, 3, 12);
        const Value out = ops::channel_shuffle(ops::constant(x), 4);
        for (int i = 0; i < 6; ++i) {
            std::vector<double> before, after;
            for (int c = 0; c < 8; ++c) {
                before.push_back(x.v[c * 6 + i]);
                after.push_back(out->val.v[c * 6 + i]);
            }
            std::sort(before.begin(), before.end());
            std::sort(after.begin(), after.end());
            CHECK(before == after);
        }
    }
    CHECK_THROWS(ops::channel_shuffle(ops::constant(tu::random_tensor(5, 2, 2, 13)), 2));
}

namespace {

/// Direct convolution oracle covering stride, padding modes and groups.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor* b, int k, int stride, int pad, ops::PadMode mode,
                   int groups) {
    const int cing = x.c / groups, coutg = w.c / groups;
    const int oh = (x.h + 2 * pad - k) / stride + 1;
    const int ow = (x.w + 2 * pad - k) / stride + 1;
    Tensor out(w.c, oh, ow);
    for (int g = 0; g < groups; ++g)
        for (int oc = 0; oc < coutg; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = b ? b->v[g * coutg + oc] : 0.0;
                    for (int ic = 0; ic < cing; ++ic)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                                double px = 0.0;
                                if (mode == ops::PadMode::Replicate) {
                                    iy = std::clamp(iy, 0, x.h - 1);
                                    ix = std::clamp(ix, 0, x.w - 1);
                                    px = x.at(g * cing + ic, iy, ix);
                                } else if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) {
                                    px = x.at(g * cing + ic, iy, ix);
                                }
                                acc += w.at(g * coutg + oc, ic, ky * k + kx) * px;
                            }
                    out.at(g * coutg + oc, oy, ox) = acc;
                }
    return out;
}

}  // namespace

TEST_CASE("conv2d forward matches the direct oracle") {
    struct Case {
        int cin, cout, k, stride, pad, groups;
        ops::PadMode mode;
    };
    const Case cases[] = {
        {3, 5, 3, 1, 1, 1, ops::PadMode::Zero},      {3, 5, 3, 1, 1, 1, ops::PadMode::Replicate},
        {4, 6, 3, 2, 1, 2, ops::PadMode::Zero},      {2, 2, 1, 1, 0, 1, ops::PadMode::Zero},
        {4, 4, 3, 1, 1, 4, ops::PadMode::Zero},      {2, 1, 7, 1, 3, 1, ops::PadMode::Zero},
    };
    int seed = 40;
    for (const Case& c : cases) {
        const Tensor x = tu::random_tensor(c.cin, 9, 8, seed++, -1.0, 1.0);
        const Tensor w = tu::random_tensor(c.cout, c.cin / c.groups, c.k * c.k, seed++, -0.5, 0.5);
        const Tensor b = tu::random_tensor(c.cout, 1, 1, seed++, -0.2, 0.2);
        const Value got = ops::conv2d(ops::constant(x), ops::constant(w), ops::constant(b), c.k, c.stride, c.pad,
                                      c.mode, c.groups);
        const Tensor want = conv_oracle(x, w, &b, c.k, c.stride, c.pad, c.mode, c.groups);
        REQUIRE(got->val.same_shape(want));
        for (size_t i = 0; i < want.v.size(); ++i) CHECK(got->val.v[i] == doctest::Approx(want.v[i]).epsilon(1e-11));
    }
}

TEST_CASE("conv2d gradients pass finite differences") {
    const Tensor x = tu::random_tensor(4, 6, 5, 60, -1.0, 1.0);
    ad::Parameter w("w", tu::random_tensor(6, 2, 9, 61, -0.5, 0.5));
    ad::Parameter b("b", tu::random_tensor(6, 1, 1, 62, -0.2, 0.2));
    ad::Parameter xin("x", x);
    const Tensor mask = tu::random_tensor(6, 3, 3, 63, 0.1, 1.0);

    auto build = [&]() {
        const Value y = ops::conv2d(ops::leaf(xin), ops::leaf(w), ops::leaf(b), 3, 2, 1, ops::PadMode::Zero, 2);
        return ops::mean(ops::mul(y, ops::constant(mask)));
    };
    CHECK(tu::max_param_grad_rel_err(w, build) < kTol);
    CHECK(tu::max_param_grad_rel_err(b, build) < kTol);
    CHECK(tu::max_param_grad_rel_err(xin, build) < kTol);

    // replicate padding routes gradients through the clamped border
    auto build_rep = [&]() {
        const Value y = ops::conv2d(ops::leaf(xin), ops::leaf(w), ops::leaf(b), 3, 1, 1, ops::PadMode::Replicate, 2);
        return ops::mean(ops::mul(y, y));
    };
    CHECK(tu::max_param_grad_rel_err(xin, build_rep) < kTol);
}

TEST_CASE("group_norm matches moments and passes finite differences") {
    Tensor x = tu::random_tensor(6, 4, 4, 70, -2.0, 2.0);
    ad::Parameter gamma("g", Tensor::full(6, 1, 1, 1.0));
    ad::Parameter beta("b", tu::random_tensor(6, 1, 1, 71, -0.3, 0.3));
    ad::Parameter xin("x", x);
    const Tensor mask = tu::random_tensor(6, 4, 4, 72, 0.1, 1.0);

    SUBCASE("normalized output has zero mean and unit variance per group") {
        const Value out = ops::group_norm(ops::constant(x), ops::constant(Tensor::full(6, 1, 1, 1.0)),
                                          ops::constant(Tensor(6, 1, 1)), 2);
        for (int g = 0; g < 2; ++g) {
            double s = 0.0, s2 = 0.0;
            for (int c = g * 3; c < (g + 1) * 3; ++c)
                for (int i = 0; i < 16; ++i) {
                    const double v = out->val.chan(c)[i];
                    s += v;
                    s2 += v * v;
                }
            const double mean = s / 48.0, var = s2 / 48.0 - mean * mean;
            CHECK(std::abs(mean) < 1e-12);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps shifts variance slightly
        }
    }
    SUBCASE("gradients") {
        auto build = [&]() {
            const Value y = ops::group_norm(ops::leaf(xin), ops::leaf(gamma), ops::leaf(beta), 3);
            return ops::mean(ops::mul(y, ops::constant(mask)));
        };
        CHECK(tu::max_param_grad_rel_err(gamma, build) < kTol);
        CHECK(tu::max_param_grad_rel_err(beta, build) < kTol);
        CHECK(tu::max_param_grad_rel_err(xin, build, 1e-6, 32) < 1e-4);
    }
}

TEST_CASE("upsample_bilinear2 preserves constants and doubles size") {
    const Tensor x = Tensor::full(2, 3, 5, 0.37);
    const Value up = ops::upsample_bilinear2(ops::constant(x));
    CHECK(up->val.c == 2);
    CHECK(up->val.h == 6);
    CHECK(up->val.w == 10);
    for (double v : up->val.v) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("backward accumulates through shared subgraphs") {
    // f(x) = mean(x*x + x*x) has gradient 4x/N; the shared node must be
    // visited once with both contributions.
    ad::Parameter p("p", tu::random_tensor(1, 2, 2, 80, 0.5, 1.5));
    const Value x = ops::leaf(p);
    const Value sq = ops::mul(x, x);
    const Value loss = ops::mean(ops::add(sq, sq));
    p.zero_grad();
    ops::backward(loss);
    for (size_t i = 0; i < p.value.size(); ++i)
        CHECK(p.grad.v[i] == doctest::Approx(4.0 * p.value.v[i] / 4.0).epsilon(1e-12));
}
