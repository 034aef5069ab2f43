#include "dmfuse/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace dmfuse::losses {

namespace ops = dmfuse::ad;
using ops::Value;

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_triplet(const GrayImage& f, const GrayImage& a, const GrayImage& b) {
    if (f.height() != a.height() || f.width() != a.width() || f.height() != b.height() || f.width() != b.width())
        throw std::invalid_argument("loss: shape mismatch");
}

struct Moments {
    double mean, var;
};

Moments patch_moments(const RawField& p) {
    double s = 0.0, s2 = 0.0;
    for (double x : p.v) {
        s += x;
        s2 += x * x;
    }
    const double n = static_cast<double>(p.v.size());
    const double mean = s / n;
    return {mean, std::max(0.0, s2 / n - mean * mean)};
}

RawField extract_patch(const GrayImage& img, int y0, int x0, int size) {
    RawField p(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) p.at(y, x) = img.at(y0 + y, x0 + x);
    return p;
}

struct PatchGrid {
    int ny, nx;
};

PatchGrid patch_grid(const GrayImage& img, int patch_size, int stride) {
    if (patch_size <= 0 || stride <= 0) throw std::invalid_argument("loss: non-positive patch/stride");
    if (patch_size > img.height() || patch_size > img.width())
        throw std::invalid_argument("loss: patch larger than image");
    return {(img.height() - patch_size) / stride + 1, (img.width() - patch_size) / stride + 1};
}

Tensor max_tensor(const GrayImage& a, const GrayImage& b) {
    Tensor t(1, a.height(), a.width());
    for (size_t i = 0; i < t.v.size(); ++i) t.v[i] = std::max(a.values()[i], b.values()[i]);
    return t;
}

Tensor sobel_kernel_x() {
    Tensor k(1, 1, 9);
    const double v[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    for (int i = 0; i < 9; ++i) k.v[i] = v[i];
    return k;
}

Tensor sobel_kernel_y() {
    Tensor k(1, 1, 9);
    const double v[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    for (int i = 0; i < 9; ++i) k.v[i] = v[i];
    return k;
}

}  // namespace

double intensity_loss(const GrayImage& fused_luma, const GrayImage& a, const GrayImage& b_luma) {
    check_triplet(fused_luma, a, b_luma);
    double acc = 0.0;
    for (size_t i = 0; i < fused_luma.values().size(); ++i)
        acc += std::abs(fused_luma.values()[i] - std::max(a.values()[i], b_luma.values()[i]));
    return acc / static_cast<double>(fused_luma.values().size());
}

double ssim_index(const RawField& x, const RawField& y) {
    if (!x.same_shape(y)) throw std::invalid_argument("ssim_index: shape mismatch");
    const Moments mx = patch_moments(x), my = patch_moments(y);
    double cov = 0.0;
    for (size_t i = 0; i < x.v.size(); ++i) cov += x.v[i] * y.v[i];
    cov = cov / static_cast<double>(x.v.size()) - mx.mean * my.mean;
    const double num = (2.0 * mx.mean * my.mean + kC1) * (2.0 * cov + kC2);
    const double den = (mx.mean * mx.mean + my.mean * my.mean + kC1) * (mx.var + my.var + kC2);
    return num / den;
}

SourceTag std_patch_select(const RawField& a_patch, const RawField& b_patch) {
    if (!a_patch.same_shape(b_patch)) throw std::invalid_argument("std_patch_select: shape mismatch");
    return patch_moments(a_patch).var >= patch_moments(b_patch).var ? SourceTag::A : SourceTag::B;
}

double ssim_std_loss(const GrayImage& fused_luma, const GrayImage& a, const GrayImage& b_luma, int patch_size,
                     int stride) {
    check_triplet(fused_luma, a, b_luma);
    const PatchGrid g = patch_grid(fused_luma, patch_size, stride);
    double acc = 0.0;
    for (int gy = 0; gy < g.ny; ++gy) {
        for (int gx = 0; gx < g.nx; ++gx) {
            const int y0 = gy * stride, x0 = gx * stride;
            const RawField pa = extract_patch(a, y0, x0, patch_size);
            const RawField pb = extract_patch(b_luma, y0, x0, patch_size);
            const RawField pf = extract_patch(fused_luma, y0, x0, patch_size);
            const RawField& sel = std_patch_select(pa, pb) == SourceTag::A ? pa : pb;
            acc += ssim_index(pf, sel);
        }
    }
    return 1.0 - acc / static_cast<double>(g.ny * g.nx);
}

double gradient_loss(const GrayImage& fused_luma, const GrayImage& a, const GrayImage& b_luma) {
    check_triplet(fused_luma, a, b_luma);
    const RawField gf = sobel_gradient(fused_luma), ga = sobel_gradient(a), gb = sobel_gradient(b_luma);
    double acc = 0.0;
    for (size_t i = 0; i < gf.v.size(); ++i) acc += std::abs(gf.v[i] - std::max(ga.v[i], gb.v[i]));
    return acc / static_cast<double>(gf.v.size());
}

LossBreakdown total_loss(const GrayImage& fused_luma, const GrayImage& a, const GrayImage& b_luma, double alpha,
                         double beta, int patch_size, int stride) {
    LossBreakdown bd;
    bd.alpha = alpha;
    bd.beta = beta;
    bd.l_int = intensity_loss(fused_luma, a, b_luma);
    bd.l_ssim = ssim_std_loss(fused_luma, a, b_luma, patch_size, stride);
    bd.l_grad = gradient_loss(fused_luma, a, b_luma);
    bd.total = alpha * bd.l_int + beta * bd.l_ssim + bd.l_grad;
    return bd;
}

Value intensity_loss_node(const Value& fused, const GrayImage& a, const GrayImage& b_luma) {
    return ops::mean(ops::abs(ops::sub_const(fused, max_tensor(a, b_luma))));
}

Value sobel_magnitude_node(const Value& x) {
    static const Tensor kx = sobel_kernel_x();
    static const Tensor ky = sobel_kernel_y();
    Value gx = ops::conv2d(x, ops::constant(kx), nullptr, 3, 1, 1, ops::PadMode::Replicate, 1);
    Value gy = ops::conv2d(x, ops::constant(ky), nullptr, 3, 1, 1, ops::PadMode::Replicate, 1);
    return ops::hypot(gx, gy);
}

Value gradient_loss_node(const Value& fused, const GrayImage& a, const GrayImage& b_luma) {
    const RawField ga = sobel_gradient(a), gb = sobel_gradient(b_luma);
    Tensor target(1, ga.height, ga.width);
    for (size_t i = 0; i < target.v.size(); ++i) target.v[i] = std::max(ga.v[i], gb.v[i]);
    return ops::mean(ops::abs(ops::sub_const(sobel_magnitude_node(fused), target)));
}

Value ssim_std_loss_node(const Value& fused, const GrayImage& a, const GrayImage& b_luma, int patch_size, int stride) {
    if (fused->val.c != 1 || fused->val.h != a.height() || fused->val.w != a.width())
        throw std::invalid_argument("ssim_std_loss_node: shape mismatch");
    const PatchGrid g = patch_grid(a, patch_size, stride);
    Value acc;
    for (int gy = 0; gy < g.ny; ++gy) {
        for (int gx = 0; gx < g.nx; ++gx) {
            const int y0 = gy * stride, x0 = gx * stride;
            const RawField pa = extract_patch(a, y0, x0, patch_size);
            const RawField pb = extract_patch(b_luma, y0, x0, patch_size);
            const RawField& sel = std_patch_select(pa, pb) == SourceTag::A ? pa : pb;
            const Moments my = patch_moments(sel);

            Value xp = ops::crop(fused, y0, x0, patch_size, patch_size);
            Value mu_x = ops::mean(xp);
            Value var_x = ops::sub(ops::mean(ops::mul(xp, xp)), ops::mul(mu_x, mu_x));
            Value cov = ops::sub(ops::mean(ops::mul_const(xp, sel.to_tensor())), ops::scale(mu_x, my.mean));
            Value num = ops::mul(ops::add_scalar(ops::scale(mu_x, 2.0 * my.mean), kC1),
                                 ops::add_scalar(ops::scale(cov, 2.0), kC2));
            Value den = ops::mul(ops::add_scalar(ops::mul(mu_x, mu_x), my.mean * my.mean + kC1),
                                 ops::add_scalar(var_x, my.var + kC2));
            Value ssim = ops::div(num, den);
            acc = acc ? ops::add(acc, ssim) : ssim;
        }
    }
    return ops::add_scalar(ops::scale(acc, -1.0 / (g.ny * g.nx)), 1.0);
}

LossBreakdown TotalLossNodes::breakdown(double alpha, double beta) const {
    LossBreakdown bd;
    bd.alpha = alpha;
    bd.beta = beta;
    bd.l_int = l_int->val.item();
    bd.l_ssim = l_ssim->val.item();
    bd.l_grad = l_grad->val.item();
    bd.total = total->val.item();
    return bd;
}

TotalLossNodes total_loss_node(const Value& fused, const GrayImage& a, const GrayImage& b_luma, double alpha,
                               double beta, int patch_size, int stride, double grad_weight) {
    TotalLossNodes out;
    out.l_int = intensity_loss_node(fused, a, b_luma);
    out.l_ssim = ssim_std_loss_node(fused, a, b_luma, patch_size, stride);
    out.l_grad = gradient_loss_node(fused, a, b_luma);
    Value grad_term = grad_weight == 1.0 ? out.l_grad : ops::scale(out.l_grad, grad_weight);
    out.total = ops::add(ops::add(ops::scale(out.l_int, alpha), ops::scale(out.l_ssim, beta)), grad_term);
    return out;
}

}  // namespace dmfuse::losses
