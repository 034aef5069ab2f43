#pragma once

#include <optional>
#include <string>
#include <variant>

#include "dmfuse/image.hpp"

namespace dmfuse {

using AnyImage = std::variant<GrayImage, ColorImage>;

/// 8-bit PNG I/O. Values map linearly between [0,255] and [0,1];
/// quantization happens only here, the pipeline itself stays continuous.
void write_png(const std::string& path, const GrayImage& img);
void write_png(const std::string& path, const ColorImage& img);

/// Reads an 8-bit grayscale or RGB PNG. Anything else is rejected.
AnyImage read_png(const std::string& path);

GrayImage read_png_gray(const std::string& path);
ColorImage read_png_rgb(const std::string& path);

/// Luma view of either image kind (color goes through rgb_to_ycbcr).
GrayImage luma_of(const AnyImage& img);

}  // namespace dmfuse
