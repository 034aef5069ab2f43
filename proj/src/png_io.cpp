#include "dmfuse/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace dmfuse {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t quantize(double x) {
    const double q = std::nearbyint(std::clamp(x, 0.0, 1.0) * 255.0);
    return static_cast<uint8_t>(q);
}

void write_png_impl(const std::string& path, int h, int w, int channels, const std::vector<uint8_t>& bytes) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("write_png: init failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("write_png: init failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: encode failure for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * w * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png(const std::string& path, const GrayImage& img) {
    const int h = img.height(), w = img.width();
    std::vector<uint8_t> bytes(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize(img.values()[i]);
    write_png_impl(path, h, w, 1, bytes);
}

void write_png(const std::string& path, const ColorImage& img) {
    const int h = img.height(), w = img.width();
    std::vector<uint8_t> bytes(static_cast<size_t>(h) * w * 3);
    for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i) {
        bytes[3 * i + 0] = quantize(img.red().v[i]);
        bytes[3 * i + 1] = quantize(img.green().v[i]);
        bytes[3 * i + 2] = quantize(img.blue().v[i]);
    }
    write_png_impl(path, h, w, 3, bytes);
}

AnyImage read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("read_png: init failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("read_png: init failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: decode failure for " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int w = png_get_image_width(png, info);
    const int h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);
    if (depth != 8 || (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: " + path + " is not 8-bit gray or RGB");
    }
    const int channels = color == PNG_COLOR_TYPE_GRAY ? 1 : 3;
    std::vector<uint8_t> bytes(static_cast<size_t>(h) * w * channels);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = bytes.data() + static_cast<size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    if (channels == 1) {
        std::vector<double> v(static_cast<size_t>(h) * w);
        for (size_t i = 0; i < v.size(); ++i) v[i] = bytes[i] / 255.0;
        return GrayImage(h, w, std::move(v));
    }
    std::vector<double> r(static_cast<size_t>(h) * w), g(r.size()), b(r.size());
    for (size_t i = 0; i < r.size(); ++i) {
        r[i] = bytes[3 * i + 0] / 255.0;
        g[i] = bytes[3 * i + 1] / 255.0;
        b[i] = bytes[3 * i + 2] / 255.0;
    }
    return ColorImage(RawField(h, w, std::move(r)), RawField(h, w, std::move(g)), RawField(h, w, std::move(b)));
}

GrayImage read_png_gray(const std::string& path) {
    AnyImage img = read_png(path);
    if (auto* g = std::get_if<GrayImage>(&img)) return *g;
    throw std::runtime_error("read_png_gray: " + path + " is not grayscale");
}

ColorImage read_png_rgb(const std::string& path) {
    AnyImage img = read_png(path);
    if (auto* c = std::get_if<ColorImage>(&img)) return *c;
    throw std::runtime_error("read_png_rgb: " + path + " is not RGB");
}

GrayImage luma_of(const AnyImage& img) {
    if (const auto* g = std::get_if<GrayImage>(&img)) return *g;
    return rgb_to_ycbcr(std::get<ColorImage>(img)).y();
}

}  // namespace dmfuse
