#pragma once

#include <string>
#include <vector>

#include "dmfuse/tensor.hpp"

namespace dmfuse {

/// Unbounded finite real grid. Carrier for noised images, gradients and
/// anything else that may leave [0,1].
struct RawField {
    int height = 0, width = 0;
    std::vector<double> v;

    RawField() = default;
    RawField(int h, int w);
    RawField(int h, int w, std::vector<double> values);

    static RawField filled(int h, int w, double val);

    double& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return v.size(); }
    bool same_shape(const RawField& o) const { return height == o.height && width == o.width; }

    Tensor to_tensor() const;
    static RawField from_tensor(const Tensor& t);  // requires c == 1
};

/// Intensity image in [0,1], at least 8x8 (minimum for 3x3 convolution
/// plus patching).
class GrayImage {
public:
    GrayImage(int height, int width, std::vector<double> values);
    explicit GrayImage(const RawField& f);

    static GrayImage filled(int h, int w, double val);
    /// Clamps an arbitrary finite field into [0,1].
    static GrayImage clamped(const RawField& f);

    int height() const { return f_.height; }
    int width() const { return f_.width; }
    double at(int y, int x) const { return f_.at(y, x); }
    const std::vector<double>& values() const { return f_.v; }
    const RawField& field() const { return f_; }
    Tensor to_tensor() const { return f_.to_tensor(); }

private:
    RawField f_;
};

/// Three [0,1] planes sharing dimensions.
class ColorImage {
public:
    ColorImage(RawField r, RawField g, RawField b);
    static ColorImage filled(int h, int w, double r, double g, double b);

    int height() const { return r_.height; }
    int width() const { return r_.width; }
    const RawField& red() const { return r_; }
    const RawField& green() const { return g_; }
    const RawField& blue() const { return b_; }

private:
    RawField r_, g_, b_;
};

/// Luma plus offset chroma, all in [0,1].
class YCbCrImage {
public:
    YCbCrImage(GrayImage y, RawField cb, RawField cr);

    const GrayImage& y() const { return y_; }
    const RawField& cb() const { return cb_; }
    const RawField& cr() const { return cr_; }

private:
    GrayImage y_;
    RawField cb_, cr_;
};

/// BT.601 full-range forward transform; chroma offset into [0,1].
YCbCrImage rgb_to_ycbcr(const ColorImage& img);

/// Exact algebraic inverse of rgb_to_ycbcr, clamped to [0,1].
ColorImage ycbcr_to_rgb(const YCbCrImage& img);

/// Per-pixel Sobel gradient magnitude sqrt(Gx^2 + Gy^2), 3x3 kernels,
/// replicate border padding. Input must be at least 3x3.
RawField sobel_gradient(const RawField& img);
RawField sobel_gradient(const GrayImage& img);

/// Population standard deviation of every patch_size x patch_size window,
/// tiled with the given stride. Output grid has one cell per window.
RawField local_std(const GrayImage& img, int patch_size, int stride);
RawField local_std(const RawField& img, int patch_size, int stride);

}  // namespace dmfuse
