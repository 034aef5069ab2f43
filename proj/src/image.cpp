#include "dmfuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmfuse {

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

void check_unit_range(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument(std::string(what) + ": value outside [0,1]");
}

// BT.601 luma weights; chroma scales make the offset chroma span exactly [0,1].
constexpr double kKr = 0.299;
constexpr double kKg = 0.587;
constexpr double kKb = 0.114;
constexpr double kCbScale = 0.5 / (1.0 - kKb);
constexpr double kCrScale = 0.5 / (1.0 - kKr);

}  // namespace

RawField::RawField(int h, int w) : height(h), width(w), v(static_cast<size_t>(h) * w, 0.0) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("RawField: non-positive dims");
}

RawField::RawField(int h, int w, std::vector<double> values) : height(h), width(w), v(std::move(values)) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("RawField: non-positive dims");
    if (v.size() != static_cast<size_t>(h) * w) throw std::invalid_argument("RawField: size mismatch");
    check_finite(v, "RawField");
}

RawField RawField::filled(int h, int w, double val) {
    RawField f(h, w);
    std::fill(f.v.begin(), f.v.end(), val);
    check_finite(f.v, "RawField");
    return f;
}

Tensor RawField::to_tensor() const {
    Tensor t(1, height, width);
    t.v = v;
    return t;
}

RawField RawField::from_tensor(const Tensor& t) {
    if (t.c != 1) throw std::invalid_argument("RawField::from_tensor: need single channel");
    return RawField(t.h, t.w, t.v);
}

GrayImage::GrayImage(int height, int width, std::vector<double> values) : f_(height, width, std::move(values)) {
    if (height < 8 || width < 8) throw std::invalid_argument("GrayImage: smaller than 8x8");
    check_unit_range(f_.v, "GrayImage");
}

GrayImage::GrayImage(const RawField& f) : GrayImage(f.height, f.width, f.v) {}

GrayImage GrayImage::filled(int h, int w, double val) {
    return GrayImage(h, w, std::vector<double>(static_cast<size_t>(h) * w, val));
}

GrayImage GrayImage::clamped(const RawField& f) {
    std::vector<double> v = f.v;
    for (double& x : v) x = std::clamp(x, 0.0, 1.0);
    return GrayImage(f.height, f.width, std::move(v));
}

ColorImage::ColorImage(RawField r, RawField g, RawField b) : r_(std::move(r)), g_(std::move(g)), b_(std::move(b)) {
    if (!r_.same_shape(g_) || !r_.same_shape(b_)) throw std::invalid_argument("ColorImage: plane shape mismatch");
    if (r_.height < 8 || r_.width < 8) throw std::invalid_argument("ColorImage: smaller than 8x8");
    check_unit_range(r_.v, "ColorImage.r");
    check_unit_range(g_.v, "ColorImage.g");
    check_unit_range(b_.v, "ColorImage.b");
}

ColorImage ColorImage::filled(int h, int w, double r, double g, double b) {
    return ColorImage(RawField::filled(h, w, r), RawField::filled(h, w, g), RawField::filled(h, w, b));
}

YCbCrImage::YCbCrImage(GrayImage y, RawField cb, RawField cr) : y_(std::move(y)), cb_(std::move(cb)), cr_(std::move(cr)) {
    if (!y_.field().same_shape(cb_) || !y_.field().same_shape(cr_))
        throw std::invalid_argument("YCbCrImage: plane shape mismatch");
    check_unit_range(cb_.v, "YCbCrImage.cb");
    check_unit_range(cr_.v, "YCbCrImage.cr");
}

YCbCrImage rgb_to_ycbcr(const ColorImage& img) {
    const int h = img.height(), w = img.width();
    std::vector<double> y(static_cast<size_t>(h) * w), cb(y.size()), cr(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
        const double r = img.red().v[i], g = img.green().v[i], b = img.blue().v[i];
        const double luma = kKr * r + kKg * g + kKb * b;
        y[i] = std::clamp(luma, 0.0, 1.0);
        cb[i] = std::clamp(0.5 + (b - luma) * kCbScale, 0.0, 1.0);
        cr[i] = std::clamp(0.5 + (r - luma) * kCrScale, 0.0, 1.0);
    }
    return YCbCrImage(GrayImage(h, w, std::move(y)), RawField(h, w, std::move(cb)), RawField(h, w, std::move(cr)));
}

ColorImage ycbcr_to_rgb(const YCbCrImage& img) {
    const int h = img.y().height(), w = img.y().width();
    std::vector<double> r(static_cast<size_t>(h) * w), g(r.size()), b(r.size());
    for (size_t i = 0; i < r.size(); ++i) {
        const double y = img.y().values()[i];
        const double db = (img.cb().v[i] - 0.5) / kCbScale;
        const double dr = (img.cr().v[i] - 0.5) / kCrScale;
        const double red = y + dr;
        const double blue = y + db;
        const double green = (y - kKr * red - kKb * blue) / kKg;
        r[i] = std::clamp(red, 0.0, 1.0);
        g[i] = std::clamp(green, 0.0, 1.0);
        b[i] = std::clamp(blue, 0.0, 1.0);
    }
    return ColorImage(RawField(h, w, std::move(r)), RawField(h, w, std::move(g)), RawField(h, w, std::move(b)));
}

RawField sobel_gradient(const RawField& img) {
    const int h = img.height, w = img.width;
    if (h < 3 || w < 3) throw std::invalid_argument("sobel_gradient: need at least 3x3");
    RawField out(h, w);
    auto px = [&](int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return img.at(y, x);
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = -px(y - 1, x - 1) + px(y - 1, x + 1) - 2.0 * px(y, x - 1) + 2.0 * px(y, x + 1) -
                              px(y + 1, x - 1) + px(y + 1, x + 1);
            const double gy = -px(y - 1, x - 1) - 2.0 * px(y - 1, x) - px(y - 1, x + 1) + px(y + 1, x - 1) +
                              2.0 * px(y + 1, x) + px(y + 1, x + 1);
            out.at(y, x) = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

RawField sobel_gradient(const GrayImage& img) { return sobel_gradient(img.field()); }

RawField local_std(const RawField& img, int patch_size, int stride) {
    if (patch_size <= 0 || stride <= 0) throw std::invalid_argument("local_std: non-positive patch/stride");
    if (patch_size > img.height || patch_size > img.width)
        throw std::invalid_argument("local_std: patch larger than image");
    const int gh = (img.height - patch_size) / stride + 1;
    const int gw = (img.width - patch_size) / stride + 1;
    RawField grid(gh, gw);
    const double n = static_cast<double>(patch_size) * patch_size;
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            double s = 0.0, s2 = 0.0;
            for (int y = 0; y < patch_size; ++y)
                for (int x = 0; x < patch_size; ++x) {
                    const double p = img.at(gy * stride + y, gx * stride + x);
                    s += p;
                    s2 += p * p;
                }
            const double mean = s / n;
            const double var = std::max(0.0, s2 / n - mean * mean);
            grid.at(gy, gx) = std::sqrt(var);
        }
    }
    return grid;
}

RawField local_std(const GrayImage& img, int patch_size, int stride) { return local_std(img.field(), patch_size, stride); }

}  // namespace dmfuse
