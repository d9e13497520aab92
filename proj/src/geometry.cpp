#include "asymstereo/geometry.hpp"

#include <stdexcept>

#include "asymstereo/autodiff.hpp"

namespace asymstereo {

WarpResult warp_right_to_left(const Tensor& src, const DisparityMap& d) {
    if (src.rank() != 3) throw std::invalid_argument("warp_right_to_left: [C,H,W] source expected");
    if (src.shape[1] != d.height() || src.shape[2] != d.width())
        throw std::invalid_argument("warp_right_to_left: source/disparity shape mismatch");
    const Var out = warp_x(Var::constant(src), Var::constant(d.data));
    WarpResult r;
    r.warped = out.val();
    r.in_bounds = warp_x_in_bounds(d.data);
    return r;
}

WarpResult warp_right_to_left(const Image& src, const DisparityMap& d) {
    return warp_right_to_left(src.data, d);
}

std::vector<std::uint8_t> downsample_mask_all_true(const std::vector<std::uint8_t>& mask,
                                                   int height, int width, int stride) {
    if (stride < 1 || height % stride != 0 || width % stride != 0)
        throw std::invalid_argument("downsample_mask_all_true: size not divisible by stride");
    const int h = height / stride, w = width / stride;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool all = true;
            for (int i = 0; i < stride && all; ++i)
                for (int j = 0; j < stride; ++j)
                    if (!mask[static_cast<std::size_t>(y * stride + i) * width + x * stride + j]) {
                        all = false;
                        break;
                    }
            out[static_cast<std::size_t>(y) * w + x] = all ? 1 : 0;
        }
    return out;
}

}  // namespace asymstereo
