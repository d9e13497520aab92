#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asymstereo/tensor.hpp"

namespace asymstereo {

enum class ColorSpace { Gray, RGB };

/// Raster image with values in [0,1], stored planar [C,H,W].
/// Conversion to integer sample values happens only at file boundaries.
struct Image {
    Tensor data;  // [C,H,W]
    ColorSpace color = ColorSpace::Gray;

    Image() = default;
    Image(int height, int width, int channels);

    int channels() const { return data.shape[0]; }
    int height() const { return data.shape[1]; }
    int width() const { return data.shape[2]; }

    double& at(int c, int y, int x) { return data.at(c, y, x); }
    double at(int c, int y, int x) const { return data.at(c, y, x); }

    /// Clamp all values into [0,1].
    void clip01();
};

/// Per-pixel horizontal correspondence offsets for the left view.
/// Positive values shift right-view content leftward. Invalid pixels are
/// tracked by an explicit mask instead of sentinel values.
struct DisparityMap {
    Tensor data;                      // [H,W]
    std::vector<std::uint8_t> valid;  // H*W, row-major

    DisparityMap() = default;
    DisparityMap(int height, int width, bool all_valid = true);

    int height() const { return data.shape[0]; }
    int width() const { return data.shape[1]; }

    double& at(int y, int x) { return data.at(y, x); }
    double at(int y, int x) const { return data.at(y, x); }
    bool is_valid(int y, int x) const { return valid[static_cast<std::size_t>(y) * width() + x] != 0; }
    void set_valid(int y, int x, bool b) { valid[static_cast<std::size_t>(y) * width() + x] = b ? 1 : 0; }
};

/// ITU-R BT.601 luma conversion; grayscale input passes through.
Image to_grayscale(const Image& img);

/// 8-bit quantization of [0,1] values: round(v*255), clamped.
std::vector<std::uint8_t> quantize_u8(const Image& img);

/// Back from 8-bit samples (planar order matching quantize_u8).
Image from_u8(const std::vector<std::uint8_t>& bytes, int height, int width, int channels);

}  // namespace asymstereo
