#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmfuse/losses.hpp"
#include "test_util.hpp"

using namespace dmfuse;
using namespace dmfuse::losses;
namespace ops = dmfuse::ad;
namespace tu = dmfuse::testutil;

TEST_CASE("intensity_loss") {
    SUBCASE("fused = max(A,B) gives zero") {
        const GrayImage a = tu::random_gray(16, 16, 1);
        const GrayImage b = tu::random_gray(16, 16, 2);
        std::vector<double> mx(a.values().size());
        for (size_t i = 0; i < mx.size(); ++i) mx[i] = std::max(a.values()[i], b.values()[i]);
        CHECK(intensity_loss(GrayImage(16, 16, mx), a, b) == 0.0);
    }
    SUBCASE("constant images give scalar arithmetic") {
        CHECK(intensity_loss(GrayImage::filled(8, 8, 0.6), GrayImage::filled(8, 8, 0.2),
                             GrayImage::filled(8, 8, 0.5)) == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("matches brute force on random triplets") {
        for (uint64_t s = 0; s < 5; ++s) {
            const GrayImage f = tu::random_gray(16, 16, 10 + s), a = tu::random_gray(16, 16, 20 + s),
                            b = tu::random_gray(16, 16, 30 + s);
            double want = 0.0;
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) want += std::abs(f.at(y, x) - std::max(a.at(y, x), b.at(y, x)));
            want /= 256.0;
            CHECK(std::abs(intensity_loss(f, a, b) - want) <= 1e-12);
        }
    }
    SUBCASE("swap symmetric") {
        const GrayImage f = tu::random_gray(16, 16, 41), a = tu::random_gray(16, 16, 42), b = tu::random_gray(16, 16, 43);
        CHECK(intensity_loss(f, a, b) == intensity_loss(f, b, a));
    }
    CHECK_THROWS(intensity_loss(GrayImage::filled(8, 8, 0.5), GrayImage::filled(16, 16, 0.5),
                                GrayImage::filled(16, 16, 0.5)));
}

TEST_CASE("ssim_index") {
    SUBCASE("identical nonconstant patches give 1") {
        const RawField x = tu::random_field(16, 16, 3);
        CHECK(ssim_index(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("matching constants give 1 through the stabilizers") {
        const RawField c = RawField::filled(8, 8, 0.3);
        CHECK(ssim_index(c, c) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("x vs 1-x matches an independently coded formula") {
        const RawField x = tu::random_field(12, 12, 5);
        RawField y(12, 12);
        for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = 1.0 - x.v[i];
        // independent evaluation from raw sums
        const double n = 144.0;
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (size_t i = 0; i < x.v.size(); ++i) {
            sx += x.v[i];
            sy += y.v[i];
            sxx += x.v[i] * x.v[i];
            syy += y.v[i] * y.v[i];
            sxy += x.v[i] * y.v[i];
        }
        const double mx = sx / n, my = sy / n;
        const double vx = sxx / n - mx * mx, vy = syy / n - my * my, cov = sxy / n - mx * my;
        const double c1 = 1e-4, c2 = 9e-4;
        const double want = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        CHECK(std::abs(ssim_index(x, y) - want) <= 1e-10);
    }
}

TEST_CASE("std_patch_select") {
    SUBCASE("larger std wins") {
        RawField hi(8, 8), lo(8, 8);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                hi.at(y, x) = (y + x) % 2 ? 0.9 : 0.1;  // std 0.4
                lo.at(y, x) = (y + x) % 2 ? 0.6 : 0.4;  // std 0.1
            }
        CHECK(std_patch_select(hi, lo) == SourceTag::A);
        CHECK(std_patch_select(lo, hi) == SourceTag::B);
    }
    SUBCASE("ties select A") {
        const RawField c = RawField::filled(8, 8, 0.5);
        CHECK(std_patch_select(c, c) == SourceTag::A);
    }
    SUBCASE("agrees with local_std on random patches") {
        for (uint64_t s = 0; s < 8; ++s) {
            const RawField a = tu::random_field(16, 16, 100 + s);
            const RawField b = tu::random_field(16, 16, 200 + s);
            const double stda = local_std(a, 16, 16).at(0, 0);
            const double stdb = local_std(b, 16, 16).at(0, 0);
            const SourceTag want = stda >= stdb ? SourceTag::A : SourceTag::B;
            CHECK(std_patch_select(a, b) == want);
        }
    }
}

TEST_CASE("ssim_std_loss") {
    SUBCASE("fused equal to the selected source gives zero") {
        // A has higher variance everywhere, so selection is A in all tiles
        const GrayImage a = tu::random_gray(32, 32, 7);
        const GrayImage b = GrayImage::filled(32, 32, 0.5);
        CHECK(ssim_std_loss(a, a, b, 16, 16) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("always within [0,2]") {
        for (uint64_t s = 0; s < 4; ++s) {
            const GrayImage f = tu::random_gray(32, 32, 300 + s), a = tu::random_gray(32, 32, 310 + s),
                            b = tu::random_gray(32, 32, 320 + s);
            const double v = ssim_std_loss(f, a, b, 8, 8);
            CHECK(v >= 0.0);
            CHECK(v <= 2.0);
        }
    }
    SUBCASE("matches per-patch brute-force recomputation") {
        const GrayImage f = tu::random_gray(32, 32, 71), a = tu::random_gray(32, 32, 72), b = tu::random_gray(32, 32, 73);
        const int w = 16, stride = 8;
        double acc = 0.0;
        int count = 0;
        for (int y0 = 0; y0 + w <= 32; y0 += stride)
            for (int x0 = 0; x0 + w <= 32; x0 += stride) {
                RawField pf(w, w), pa(w, w), pb(w, w);
                for (int y = 0; y < w; ++y)
                    for (int x = 0; x < w; ++x) {
                        pf.at(y, x) = f.at(y0 + y, x0 + x);
                        pa.at(y, x) = a.at(y0 + y, x0 + x);
                        pb.at(y, x) = b.at(y0 + y, x0 + x);
                    }
                const RawField& sel = std_patch_select(pa, pb) == SourceTag::A ? pa : pb;
                acc += ssim_index(pf, sel);
                ++count;
            }
        CHECK(std::abs(ssim_std_loss(f, a, b, w, stride) - (1.0 - acc / count)) <= 1e-10);
    }
    CHECK_THROWS(ssim_std_loss(GrayImage::filled(8, 8, 0.1), GrayImage::filled(8, 8, 0.1),
                               GrayImage::filled(8, 8, 0.1), 16, 16));
}

TEST_CASE("gradient_loss") {
    SUBCASE("matching gradient magnitudes give zero") {
        const GrayImage a = tu::random_gray(16, 16, 81);
        const GrayImage b = GrayImage::filled(16, 16, 0.4);
        CHECK(gradient_loss(a, a, b) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("constant fused vs ramp A matches the Sobel-ramp oracle") {
        const int n = 16;
        RawField rampf(n, n);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) rampf.at(y, x) = static_cast<double>(x) / (n - 1);
        const GrayImage ramp(rampf);
        const GrayImage flat = GrayImage::filled(n, n, 0.5);
        // |grad fused| = 0, so the loss is the mean Sobel magnitude of the ramp
        const RawField g = sobel_gradient(ramp);
        double want = 0.0;
        for (double v : g.v) want += v;
        want /= g.v.size();
        CHECK(gradient_loss(flat, ramp, flat) == doctest::Approx(want).epsilon(1e-12));
        // interior response of the ramp is 8/(n-1)
        CHECK(g.at(n / 2, n / 2) == doctest::Approx(8.0 / (n - 1)).epsilon(1e-12));
    }
    SUBCASE("brute force agreement on random triplets") {
        for (uint64_t s = 0; s < 5; ++s) {
            const GrayImage f = tu::random_gray(16, 16, 400 + s), a = tu::random_gray(16, 16, 410 + s),
                            b = tu::random_gray(16, 16, 420 + s);
            const RawField gf = sobel_gradient(f), ga = sobel_gradient(a), gb = sobel_gradient(b);
            double want = 0.0;
            for (size_t i = 0; i < gf.v.size(); ++i) want += std::abs(gf.v[i] - std::max(ga.v[i], gb.v[i]));
            want /= gf.v.size();
            CHECK(std::abs(gradient_loss(f, a, b) - want) <= 1e-10);
            CHECK(gradient_loss(f, a, b) == gradient_loss(f, b, a));
        }
    }
}

TEST_CASE("total_loss") {
    const GrayImage f = tu::random_gray(32, 32, 501), a = tu::random_gray(32, 32, 502), b = tu::random_gray(32, 32, 503);

    SUBCASE("defaults recompose exactly") {
        const LossBreakdown bd = total_loss(f, a, b, 1.5, 0.5, 16, 16);
        CHECK(bd.alpha == 1.5);
        CHECK(bd.beta == 0.5);
        CHECK(std::abs(bd.total - (1.5 * bd.l_int + 0.5 * bd.l_ssim + bd.l_grad)) <= 1e-12);
        CHECK(std::abs(bd.l_int - intensity_loss(f, a, b)) <= 1e-12);
        CHECK(std::abs(bd.l_ssim - ssim_std_loss(f, a, b, 16, 16)) <= 1e-12);
        CHECK(std::abs(bd.l_grad - gradient_loss(f, a, b)) <= 1e-12);
    }
    SUBCASE("alpha = beta = 0 leaves the gradient term") {
        const LossBreakdown bd = total_loss(f, a, b, 0.0, 0.0, 16, 16);
        CHECK(bd.total == doctest::Approx(bd.l_grad).epsilon(1e-15));
    }
}

TEST_CASE("differentiable losses match the plain route and pass finite differences") {
    const GrayImage a = tu::random_gray(8, 8, 601), b = tu::random_gray(8, 8, 602);
    Tensor fused = tu::random_tensor(1, 8, 8, 603, 0.05, 0.95);
    const GrayImage fimg(RawField(8, 8, fused.v));

    SUBCASE("node values equal plain values") {
        const ops::Value fv = ops::constant(fused);
        CHECK(intensity_loss_node(fv, a, b)->val.item() == doctest::Approx(intensity_loss(fimg, a, b)).epsilon(1e-14));
        CHECK(gradient_loss_node(fv, a, b)->val.item() == doctest::Approx(gradient_loss(fimg, a, b)).epsilon(1e-14));
        CHECK(ssim_std_loss_node(fv, a, b, 4, 4)->val.item() ==
              doctest::Approx(ssim_std_loss(fimg, a, b, 4, 4)).epsilon(1e-12));
        const auto nodes = total_loss_node(fv, a, b, 1.5, 0.5, 4, 4);
        const LossBreakdown bd = total_loss(fimg, a, b, 1.5, 0.5, 4, 4);
        CHECK(nodes.total->val.item() == doctest::Approx(bd.total).epsilon(1e-12));
    }
    SUBCASE("finite differences of total loss w.r.t. the fused image") {
        CHECK(tu::max_input_grad_rel_err(
                  fused, [&](const ops::Value& v) { return total_loss_node(v, a, b, 1.5, 0.5, 4, 4).total; }, 1e-6,
                  32) < 1e-3);
    }
}
