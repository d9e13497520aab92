#include "asymstereo/io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace asymstereo {

namespace {

Image from_mat(const cv::Mat& m) {
    const int ch = m.channels();
    if (ch != 1 && ch != 3 && ch != 4)
        throw std::runtime_error("format error: unsupported channel count " + std::to_string(ch));
    const int out_ch = ch == 1 ? 1 : 3;
    double scale;
    if (m.depth() == CV_8U) scale = 1.0 / 255.0;
    else if (m.depth() == CV_16U) scale = 1.0 / 65535.0;
    else throw std::runtime_error("format error: unsupported bit depth");

    Image img(m.rows, m.cols, out_ch);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            if (ch == 1) {
                const double v = m.depth() == CV_8U ? m.at<std::uint8_t>(y, x) : m.at<std::uint16_t>(y, x);
                img.at(0, y, x) = v * scale;
            } else {
                // OpenCV stores BGR(A); alpha, if present, is dropped.
                double b, g, r;
                if (m.depth() == CV_8U) {
                    const auto* p = m.ptr<std::uint8_t>(y) + static_cast<std::size_t>(x) * ch;
                    b = p[0]; g = p[1]; r = p[2];
                } else {
                    const auto* p = m.ptr<std::uint16_t>(y) + static_cast<std::size_t>(x) * ch;
                    b = p[0]; g = p[1]; r = p[2];
                }
                img.at(0, y, x) = r * scale;
                img.at(1, y, x) = g * scale;
                img.at(2, y, x) = b * scale;
            }
        }
    return img;
}

cv::Mat to_mat(const Image& img, int bit_depth) {
    const int ch = img.channels();
    const int type = bit_depth == 8 ? CV_MAKETYPE(CV_8U, ch) : CV_MAKETYPE(CV_16U, ch);
    const double maxv = bit_depth == 8 ? 255.0 : 65535.0;
    cv::Mat m(img.height(), img.width(), type);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            if (ch == 1) {
                const double v = std::clamp(img.at(0, y, x), 0.0, 1.0) * maxv;
                if (bit_depth == 8) m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(v));
                else m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(v));
            } else {
                const double r = std::clamp(img.at(0, y, x), 0.0, 1.0) * maxv;
                const double g = std::clamp(img.at(1, y, x), 0.0, 1.0) * maxv;
                const double b = std::clamp(img.at(2, y, x), 0.0, 1.0) * maxv;
                if (bit_depth == 8) {
                    auto* p = m.ptr<std::uint8_t>(y) + static_cast<std::size_t>(x) * 3;
                    p[0] = static_cast<std::uint8_t>(std::lround(b));
                    p[1] = static_cast<std::uint8_t>(std::lround(g));
                    p[2] = static_cast<std::uint8_t>(std::lround(r));
                } else {
                    auto* p = m.ptr<std::uint16_t>(y) + static_cast<std::size_t>(x) * 3;
                    p[0] = static_cast<std::uint16_t>(std::lround(b));
                    p[1] = static_cast<std::uint16_t>(std::lround(g));
                    p[2] = static_cast<std::uint16_t>(std::lround(r));
                }
            }
        }
    return m;
}

float byteswap_f32(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    u = __builtin_bswap32(u);
    std::memcpy(&f, &u, 4);
    return f;
}

constexpr bool host_little_endian = std::endian::native == std::endian::little;

DisparityMap load_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("io error: cannot open " + path);

    std::string magic;
    in >> magic;
    if (magic != "Pf" && magic != "PF") throw std::runtime_error("format error: not a PFM file: " + path);
    const int channels = magic == "PF" ? 3 : 1;
    int w = 0, h = 0;
    double scale = 0;
    in >> w >> h >> scale;
    if (!in || w <= 0 || h <= 0 || scale == 0) throw std::runtime_error("format error: malformed PFM header");
    in.get();  // single whitespace after the header

    const bool file_little = scale < 0;
    const bool bottom_up = scale < 0;

    std::vector<float> row(static_cast<std::size_t>(w) * channels);
    DisparityMap d(h, w);
    for (int r = 0; r < h; ++r) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
        if (!in) throw std::runtime_error("format error: truncated PFM data");
        const int y = bottom_up ? h - 1 - r : r;
        for (int x = 0; x < w; ++x) {
            float f = row[static_cast<std::size_t>(x) * channels];  // first channel only
            if (file_little != host_little_endian) f = byteswap_f32(f);
            d.at(y, x) = f;
            d.set_valid(y, x, std::isfinite(f));
        }
    }
    return d;
}

DisparityMap load_kitti_png16(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("io error: cannot read " + path);
    if (m.type() != CV_16UC1) throw std::runtime_error("format error: kitti disparity must be 16-bit single-channel PNG");
    DisparityMap d(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            const std::uint16_t v = m.at<std::uint16_t>(y, x);
            d.at(y, x) = v / 256.0;
            d.set_valid(y, x, v != 0);
        }
    return d;
}

}  // namespace

Image load_image(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("io error: cannot read " + path);
    if (m.rows < 8 || m.cols < 8) throw std::runtime_error("format error: image smaller than 8x8: " + path);
    return from_mat(m);
}

void save_image(const Image& img, const std::string& path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("save_image: bit depth must be 8 or 16");
    if (!cv::imwrite(path, to_mat(img, bit_depth)))
        throw std::runtime_error("io error: cannot write " + path);
}

DisparityMap load_disparity(const std::string& path, DisparityFormat format) {
    return format == DisparityFormat::Pfm ? load_pfm(path) : load_kitti_png16(path);
}

void save_disparity(const DisparityMap& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("io error: cannot open " + path);
    const int h = d.height(), w = d.width();
    out << "Pf\n" << w << " " << h << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(w));
    for (int r = 0; r < h; ++r) {
        const int y = h - 1 - r;  // bottom-up
        for (int x = 0; x < w; ++x) {
            float f = d.is_valid(y, x) ? static_cast<float>(d.at(y, x))
                                       : std::numeric_limits<float>::infinity();
            if (!host_little_endian) f = byteswap_f32(f);
            row[static_cast<std::size_t>(x)] = f;
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    }
    if (!out) throw std::runtime_error("io error: write failed: " + path);
}

void render_disparity(const DisparityMap& d, const std::string& path, double d_max) {
    if (d_max <= 0) throw std::invalid_argument("render_disparity: d_max must be positive");
    cv::Mat gray(d.height(), d.width(), CV_8UC1);
    for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x) {
            const double t = std::clamp(d.at(y, x) / d_max, 0.0, 1.0);
            gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(t * 255.0));
        }
    cv::Mat colored;
    cv::applyColorMap(gray, colored, cv::COLORMAP_VIRIDIS);
    for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x)
            if (!d.is_valid(y, x)) colored.at<cv::Vec3b>(y, x) = cv::Vec3b(0, 0, 0);
    if (!cv::imwrite(path, colored)) throw std::runtime_error("io error: cannot write " + path);
}

}  // namespace asymstereo
