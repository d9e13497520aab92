#include "asymstereo/image.hpp"

#include <algorithm>
#include <cmath>

namespace asymstereo {

Image::Image(int height, int width, int channels) {
    if (height < 1 || width < 1 || (channels != 1 && channels != 3))
        throw std::invalid_argument("image: bad dimensions");
    data = Tensor({channels, height, width});
    color = channels == 1 ? ColorSpace::Gray : ColorSpace::RGB;
}

void Image::clip01() {
    for (auto& x : data.v) x = std::clamp(x, 0.0, 1.0);
}

Image to_grayscale(const Image& img) {
    if (img.channels() == 1) return img;
    Image out(img.height(), img.width(), 1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.at(0, y, x) =
                0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
    return out;
}

std::vector<std::uint8_t> quantize_u8(const Image& img) {
    std::vector<std::uint8_t> out(img.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = std::clamp(img.data.v[i], 0.0, 1.0);
        out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

Image from_u8(const std::vector<std::uint8_t>& bytes, int height, int width, int channels) {
    Image img(height, width, channels);
    if (bytes.size() != img.data.size()) throw std::invalid_argument("from_u8: size mismatch");
    for (std::size_t i = 0; i < bytes.size(); ++i) img.data.v[i] = bytes[i] / 255.0;
    return img;
}

DisparityMap::DisparityMap(int height, int width, bool all_valid) {
    if (height < 1 || width < 1) throw std::invalid_argument("disparity: bad dimensions");
    data = Tensor({height, width});
    valid.assign(static_cast<std::size_t>(height) * width, all_valid ? 1 : 0);
}

}  // namespace asymstereo
