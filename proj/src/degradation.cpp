#include "asymstereo/degradation.hpp"

#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace asymstereo {

std::string to_string(DegradationMode m) {
    switch (m) {
        case DegradationMode::BIC: return "BIC";
        case DegradationMode::IG: return "IG";
        case DegradationMode::AG: return "AG";
        case DegradationMode::IG_JPEG: return "IG_JPEG";
        case DegradationMode::AG_JPEG: return "AG_JPEG";
    }
    throw std::logic_error("unreachable");
}

DegradationMode degradation_mode_from_string(const std::string& s) {
    if (s == "BIC") return DegradationMode::BIC;
    if (s == "IG") return DegradationMode::IG;
    if (s == "AG") return DegradationMode::AG;
    if (s == "IG_JPEG") return DegradationMode::IG_JPEG;
    if (s == "AG_JPEG") return DegradationMode::AG_JPEG;
    throw std::invalid_argument("unknown degradation mode: " + s);
}

namespace {

bool mode_has_kernel(DegradationMode m) { return m != DegradationMode::BIC; }
bool mode_has_jpeg(DegradationMode m) {
    return m == DegradationMode::IG_JPEG || m == DegradationMode::AG_JPEG;
}

}  // namespace

void DegradationSpec::validate() const {
    if (scale != 2 && scale != 3 && scale != 4 && scale != 6 && scale != 8)
        throw std::invalid_argument("degradation: scale must be one of {2,3,4,6,8}");
    if (mode_has_kernel(mode) != kernel.has_value())
        throw std::invalid_argument("degradation: kernel must be present exactly for IG/AG modes");
    if (mode_has_jpeg(mode) != jpeg_quality.has_value())
        throw std::invalid_argument("degradation: jpeg_quality must be present exactly for *_JPEG modes");
    if (kernel) {
        if (kernel->size < 3 || kernel->size % 2 == 0)
            throw std::invalid_argument("degradation: kernel size must be odd and >= 3");
        if (kernel->sigma_x <= 0 || kernel->sigma_y <= 0)
            throw std::invalid_argument("degradation: sigmas must be positive");
    }
    if (jpeg_quality && (*jpeg_quality < 5 || *jpeg_quality > 100))
        throw std::invalid_argument("degradation: jpeg_quality must be in [5,100]");
}

std::string DegradationSpec::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "mode = " << to_string(mode) << "\n";
    os << "scale = " << scale << "\n";
    if (kernel) {
        os << "sigma_x = " << kernel->sigma_x << "\n";
        os << "sigma_y = " << kernel->sigma_y << "\n";
        os << "theta = " << kernel->theta << "\n";
        os << "kernel_size = " << kernel->size << "\n";
    }
    if (jpeg_quality) os << "jpeg_quality = " << *jpeg_quality << "\n";
    os << "rng_seed = " << rng_seed << "\n";
    return os.str();
}

namespace {

std::map<std::string, std::string> parse_kv(const std::string& text, char sep) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, sep)) {
        const auto hash = item.find('#');
        if (hash != std::string::npos) item.erase(hash);
        const auto eq = item.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r\n");
            const auto e = s.find_last_not_of(" \t\r\n");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string k = trim(item.substr(0, eq));
        const std::string v = trim(item.substr(eq + 1));
        if (!k.empty()) kv[k] = v;
    }
    return kv;
}

DegradationSpec spec_from_kv(const std::map<std::string, std::string>& kv) {
    DegradationSpec spec;
    auto need = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw std::invalid_argument("degradation spec: missing key " + k);
        return it->second;
    };
    spec.mode = degradation_mode_from_string(need("mode"));
    spec.scale = std::stoi(need("scale"));
    if (mode_has_kernel(spec.mode)) {
        GaussianKernelSpec k;
        k.sigma_x = std::stod(need("sigma_x"));
        k.sigma_y = std::stod(need("sigma_y"));
        k.theta = std::stod(need("theta"));
        k.size = std::stoi(need("kernel_size"));
        spec.kernel = k;
    }
    if (mode_has_jpeg(spec.mode)) spec.jpeg_quality = std::stoi(need("jpeg_quality"));
    spec.rng_seed = std::stoull(need("rng_seed"));
    spec.validate();
    return spec;
}

}  // namespace

DegradationSpec DegradationSpec::from_text(const std::string& text) {
    return spec_from_kv(parse_kv(text, '\n'));
}

std::string DegradationSpec::to_line() const {
    std::string text = to_text();
    std::string line;
    for (char c : text) {
        if (c == '\n') {
            if (!line.empty() && line.back() != ';') line += ';';
        } else if (c != ' ') {
            line += c;
        }
    }
    if (!line.empty() && line.back() == ';') line.pop_back();
    return line;
}

DegradationSpec DegradationSpec::from_line(const std::string& line) {
    return spec_from_kv(parse_kv(line, ';'));
}

DegradationSpec sample_spec(const DegradationTemplate& tmpl, std::uint64_t seed) {
    Rng rng(seed);
    DegradationSpec spec;
    spec.mode = tmpl.mode;
    spec.scale = tmpl.scale;
    spec.rng_seed = seed;
    if (mode_has_kernel(tmpl.mode)) {
        GaussianKernelSpec k;
        const bool iso = tmpl.mode == DegradationMode::IG || tmpl.mode == DegradationMode::IG_JPEG;
        if (iso) {
            k.sigma_x = k.sigma_y = uniform(rng, tmpl.ig_sigma_min, tmpl.ig_sigma_max);
            k.theta = 0.0;
        } else {
            k.sigma_x = uniform(rng, tmpl.ag_sigma_min, tmpl.ag_sigma_max);
            k.sigma_y = uniform(rng, tmpl.ag_sigma_min, tmpl.ag_sigma_max);
            k.theta = uniform(rng, 0.0, 3.14159265358979323846);
        }
        k.size = 2 * static_cast<int>(std::ceil(3.0 * std::max(k.sigma_x, k.sigma_y))) + 1;
        spec.kernel = k;
    }
    if (mode_has_jpeg(tmpl.mode))
        spec.jpeg_quality = uniform_int(rng, tmpl.jpeg_quality_min, tmpl.jpeg_quality_max);
    spec.validate();
    return spec;
}

Tensor make_gaussian_kernel(const GaussianKernelSpec& spec) {
    if (spec.size < 3 || spec.size % 2 == 0)
        throw std::invalid_argument("make_gaussian_kernel: size must be odd and >= 3");
    if (spec.sigma_x <= 0 || spec.sigma_y <= 0)
        throw std::invalid_argument("make_gaussian_kernel: sigmas must be positive");

    // Inverse covariance of R(theta) diag(sx^2, sy^2) R(theta)^T.
    const double c = std::cos(spec.theta), s = std::sin(spec.theta);
    const double ix = 1.0 / (spec.sigma_x * spec.sigma_x);
    const double iy = 1.0 / (spec.sigma_y * spec.sigma_y);
    const double a = c * c * ix + s * s * iy;
    const double b = c * s * (ix - iy);
    const double d = s * s * ix + c * c * iy;

    const int r = spec.size / 2;
    Tensor k({spec.size, spec.size});
    double sum = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const double q = a * dx * dx + 2.0 * b * dx * dy + d * dy * dy;
            const double v = std::exp(-0.5 * q);
            k.at(dy + r, dx + r) = v;
            sum += v;
        }
    for (auto& v : k.v) v /= sum;
    return k;
}

namespace {

// Keys cubic kernel, a = -0.5.
double cubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
    return 0.0;
}

struct ResampleTaps {
    int first;
    std::vector<double> w;
};

// Half-pixel center mapping with sum-normalized weights; on minification the
// kernel support is stretched by in/out (anti-aliasing).
std::vector<ResampleTaps> make_taps(int n_in, int n_out) {
    const double ratio = static_cast<double>(n_in) / n_out;
    const double support_scale = std::max(1.0, ratio);
    std::vector<ResampleTaps> taps(static_cast<std::size_t>(n_out));
    for (int o = 0; o < n_out; ++o) {
        const double center = (o + 0.5) * ratio - 0.5;
        const int first = static_cast<int>(std::ceil(center - 2.0 * support_scale));
        const int last = static_cast<int>(std::floor(center + 2.0 * support_scale));
        ResampleTaps& t = taps[o];
        t.first = first;
        t.w.resize(static_cast<std::size_t>(last - first + 1));
        double sum = 0;
        for (int i = first; i <= last; ++i) {
            const double w = cubic_weight((i - center) / support_scale);
            t.w[static_cast<std::size_t>(i - first)] = w;
            sum += w;
        }
        for (auto& w : t.w) w /= sum;
    }
    return taps;
}

}  // namespace

Image bicubic_resize(const Image& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bicubic_resize: bad output size");
    const int C = src.channels(), H = src.height(), W = src.width();
    const auto tx = make_taps(W, out_w);
    const auto ty = make_taps(H, out_h);

    // Horizontal pass, then vertical.
    Tensor mid({C, H, out_w});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < out_w; ++x) {
                const auto& t = tx[x];
                double s = 0;
                for (std::size_t i = 0; i < t.w.size(); ++i) {
                    const int sx = std::clamp(t.first + static_cast<int>(i), 0, W - 1);
                    s += t.w[i] * src.at(c, y, sx);
                }
                mid.at(c, y, x) = s;
            }

    Image out(out_h, out_w, C);
    out.color = src.color;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < out_h; ++y) {
            const auto& t = ty[y];
            for (int x = 0; x < out_w; ++x) {
                double s = 0;
                for (std::size_t i = 0; i < t.w.size(); ++i) {
                    const int sy = std::clamp(t.first + static_cast<int>(i), 0, H - 1);
                    s += t.w[i] * mid.at(c, sy, x);
                }
                out.at(c, y, x) = s;
            }
        }
    out.clip01();
    return out;
}

namespace {

int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

Image convolve_reflect(const Image& src, const Tensor& kernel) {
    const int C = src.channels(), H = src.height(), W = src.width();
    const int ks = kernel.shape[0], r = ks / 2;
    Image out(H, W, C);
    out.color = src.color;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double s = 0;
                for (int i = -r; i <= r; ++i) {
                    const int sy = reflect_index(y + i, H);
                    for (int j = -r; j <= r; ++j)
                        s += kernel.at(i + r, j + r) * src.at(c, sy, reflect_index(x + j, W));
                }
                out.at(c, y, x) = s;
            }
    return out;
}

Image subsample(const Image& src, int s) {
    const int offset = (s - 1) / 2;
    const int C = src.channels();
    Image out(src.height() / s, src.width() / s, C);
    out.color = src.color;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x)
                out.at(c, y, x) = src.at(c, y * s + offset, x * s + offset);
    return out;
}

Image jpeg_roundtrip(const Image& src, int quality) {
    const int C = src.channels();
    cv::Mat m(src.height(), src.width(), CV_MAKETYPE(CV_8U, C));
    const auto bytes = quantize_u8(src);
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x) {
            if (C == 1) {
                m.at<std::uint8_t>(y, x) = bytes[static_cast<std::size_t>(y) * src.width() + x];
            } else {
                auto* p = m.ptr<std::uint8_t>(y) + static_cast<std::size_t>(x) * 3;
                const std::size_t plane = static_cast<std::size_t>(src.height()) * src.width();
                const std::size_t i = static_cast<std::size_t>(y) * src.width() + x;
                p[0] = bytes[2 * plane + i];  // B
                p[1] = bytes[plane + i];      // G
                p[2] = bytes[i];              // R
            }
        }
    std::vector<std::uint8_t> buf;
    cv::imencode(".jpg", m, buf, {cv::IMWRITE_JPEG_QUALITY, quality});
    cv::Mat dec = cv::imdecode(buf, C == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
    if (dec.empty()) throw std::runtime_error("io error: jpeg round trip failed");

    Image out(src.height(), src.width(), C);
    out.color = src.color;
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x) {
            if (C == 1) {
                out.at(0, y, x) = dec.at<std::uint8_t>(y, x) / 255.0;
            } else {
                const auto* p = dec.ptr<std::uint8_t>(y) + static_cast<std::size_t>(x) * 3;
                out.at(0, y, x) = p[2] / 255.0;
                out.at(1, y, x) = p[1] / 255.0;
                out.at(2, y, x) = p[0] / 255.0;
            }
        }
    return out;
}

}  // namespace

Image degrade(const Image& hr, const DegradationSpec& spec) {
    spec.validate();
    const int s = spec.scale;
    if (hr.height() % s != 0 || hr.width() % s != 0)
        throw std::invalid_argument("degrade: image size must be divisible by the scale");

    Image lr;
    if (spec.mode == DegradationMode::BIC) {
        lr = bicubic_resize(hr, hr.height() / s, hr.width() / s);
    } else {
        const Tensor kernel = make_gaussian_kernel(*spec.kernel);
        lr = subsample(convolve_reflect(hr, kernel), s);
    }
    lr.clip01();
    if (spec.jpeg_quality) lr = jpeg_roundtrip(lr, *spec.jpeg_quality);
    return lr;
}

Image upsample_bicubic(const Image& lr, int s) {
    if (s < 1) throw std::invalid_argument("upsample_bicubic: scale must be >= 1");
    if (s == 1) return lr;
    return bicubic_resize(lr, lr.height() * s, lr.width() * s);
}

}  // namespace asymstereo
