#pragma once

#include <cstdint>
#include <vector>

#include "asymstereo/image.hpp"

namespace asymstereo {

/// Result of warping the right view into the left view.
struct WarpResult {
    Tensor warped;                        // same shape as the source, [C,H,W]
    std::vector<std::uint8_t> in_bounds;  // H*W; false where the source column fell outside
};

/// Horizontal backward warp: warped[c,y,x] = src[c,y, x - d[y,x]] with
/// bilinear sampling. Out-of-bounds source coordinates are clamped to the
/// border and flagged false in in_bounds; consumers decide whether to mask.
/// The same kernel backs the differentiable warp_x op.
WarpResult warp_right_to_left(const Tensor& src, const DisparityMap& d);
WarpResult warp_right_to_left(const Image& src, const DisparityMap& d);

/// Reduce a full-resolution mask to feature stride: a low-res cell is true
/// iff every pixel of its stride x stride block is true.
std::vector<std::uint8_t> downsample_mask_all_true(const std::vector<std::uint8_t>& mask,
                                                   int height, int width, int stride);

}  // namespace asymstereo
