#include "asymstereo/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "asymstereo/io.hpp"

namespace fs = std::filesystem;

namespace asymstereo {

// ---- manifest ----------------------------------------------------------------

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("io error: cannot open " + path);
    out << "dataset = " << m.dataset << "\n";
    out << "split = " << m.split << "\n";
    out << "d_max = " << m.d_max << "\n";
    auto field = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
    for (const auto& sc : m.scenes) {
        out << sc.scene_id << '\t' << field(sc.left_path) << '\t' << field(sc.right_hr_path) << '\t'
            << field(sc.right_lr_path) << '\t' << field(sc.right_up_path) << '\t'
            << field(sc.gt_path) << '\t' << sc.spec.to_line() << "\n";
    }
    if (!out) throw std::runtime_error("io error: write failed: " + path);
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool verify_scene_degradation(const Manifest& m, const SceneEntry& sc, std::string& why) {
    if (sc.right_hr_path.empty()) return true;
    const Image hr = load_image(m.root_dir + "/" + sc.right_hr_path);
    const Image lr = load_image(m.root_dir + "/" + sc.right_lr_path);
    const Image redone = degrade(hr, sc.spec);
    if (redone.height() != lr.height() || redone.width() != lr.width() ||
        redone.channels() != lr.channels()) {
        why = "LR shape does not match degrade output";
        return false;
    }
    if (quantize_u8(redone) != quantize_u8(lr)) {
        why = "degrade(I_R, spec) does not reproduce I_r";
        return false;
    }
    return true;
}

}  // namespace

Manifest load_manifest(const std::string& path, VerifyMode verify) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("io error: cannot open " + path);
    Manifest m;
    m.root_dir = fs::path(path).has_parent_path() ? fs::path(path).parent_path().string() : ".";

    std::string line;
    std::vector<std::string> problems;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.find('\t') == std::string::npos) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                const auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            const std::string k = trim(line.substr(0, eq));
            const std::string v = trim(line.substr(eq + 1));
            if (k == "dataset") m.dataset = v;
            else if (k == "split") m.split = v;
            else if (k == "d_max") m.d_max = std::stoi(v);
            continue;
        }
        const auto cols = split_tabs(line);
        if (cols.size() != 7) throw std::runtime_error("format error: manifest row needs 7 columns");
        SceneEntry sc;
        sc.scene_id = cols[0];
        auto opt = [](const std::string& s) { return s == "-" ? std::string() : s; };
        sc.left_path = opt(cols[1]);
        sc.right_hr_path = opt(cols[2]);
        sc.right_lr_path = opt(cols[3]);
        sc.right_up_path = opt(cols[4]);
        sc.gt_path = opt(cols[5]);
        sc.spec = DegradationSpec::from_line(cols[6]);

        for (const std::string* p : {&sc.left_path, &sc.right_hr_path, &sc.right_lr_path,
                                     &sc.right_up_path, &sc.gt_path}) {
            if (!p->empty() && !fs::exists(m.root_dir + "/" + *p))
                problems.push_back(sc.scene_id + ": missing file " + *p);
        }
        m.scenes.push_back(std::move(sc));
    }
    if (!problems.empty()) {
        std::string msg = "ingestion error: manifest references missing files:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw std::runtime_error(msg);
    }

    if (verify != VerifyMode::None) {
        std::vector<SceneEntry> kept;
        for (const auto& sc : m.scenes) {
            std::string why;
            if (verify_scene_degradation(m, sc, why)) {
                kept.push_back(sc);
            } else if (verify == VerifyMode::Strict) {
                throw std::runtime_error("ingestion error: scene " + sc.scene_id + ": " + why);
            } else {
                std::cerr << "warning: skipping scene " << sc.scene_id << ": " << why << "\n";
            }
        }
        m.scenes = std::move(kept);
    }
    return m;
}

StereoSample load_sample(const Manifest& m, std::size_t index) {
    if (index >= m.scenes.size()) throw std::invalid_argument("load_sample: index out of range");
    const SceneEntry& sc = m.scenes[index];
    StereoSample s;
    s.scene_id = sc.scene_id;
    s.spec = sc.spec;
    s.left = load_image(m.root_dir + "/" + sc.left_path);
    s.right_lr = load_image(m.root_dir + "/" + sc.right_lr_path);
    s.right_up = load_image(m.root_dir + "/" + sc.right_up_path);
    if (!sc.right_hr_path.empty()) s.right_hr = load_image(m.root_dir + "/" + sc.right_hr_path);
    if (!sc.gt_path.empty()) s.gt_disparity = load_disparity(m.root_dir + "/" + sc.gt_path, DisparityFormat::Pfm);

    if (s.left.height() != s.right_up.height() || s.left.width() != s.right_up.width())
        throw std::runtime_error("ingestion error: " + sc.scene_id + ": left/right_up size mismatch");
    if (s.right_lr.height() * sc.spec.scale != s.left.height() ||
        s.right_lr.width() * sc.spec.scale != s.left.width())
        throw std::runtime_error("ingestion error: " + sc.scene_id + ": LR size is not HR/s");
    return s;
}

std::vector<StereoSample> load_all_samples(const Manifest& m) {
    std::vector<StereoSample> out;
    out.reserve(m.scenes.size());
    for (std::size_t i = 0; i < m.scenes.size(); ++i) out.push_back(load_sample(m, i));
    return out;
}

// ---- simulation ----------------------------------------------------------------

namespace {

/// Quantize to the 8-bit grid in memory, exactly as a PNG round trip would.
Image snap_u8(const Image& img) {
    return from_u8(quantize_u8(img), img.height(), img.width(), img.channels());
}

struct SceneFilePaths {
    std::string left, right_hr, right_lr, right_up, gt, spec;
};

SceneFilePaths scene_paths(const std::string& scene_id) {
    return {scene_id + "/left.png",     scene_id + "/right_hr.png", scene_id + "/right_lr.png",
            scene_id + "/right_up.png", scene_id + "/disp_gt.pfm",  scene_id + "/spec.txt"};
}

SceneEntry write_scene(const std::string& out_dir, const std::string& scene_id, const Image& left,
                       const Image& right_hr, const DisparityMap* gt, const DegradationSpec& spec) {
    const auto p = scene_paths(scene_id);
    fs::create_directories(out_dir + "/" + scene_id);

    const Image left_q = snap_u8(left);
    const Image right_q = snap_u8(right_hr);
    const Image right_lr = degrade(right_q, spec);  // degrade sees exactly the stored bytes
    const Image right_lr_q = snap_u8(right_lr);
    const Image right_up = upsample_bicubic(right_lr_q, spec.scale);

    save_image(left_q, out_dir + "/" + p.left);
    save_image(right_q, out_dir + "/" + p.right_hr);
    save_image(right_lr_q, out_dir + "/" + p.right_lr);
    save_image(snap_u8(right_up), out_dir + "/" + p.right_up);
    if (gt) save_disparity(*gt, out_dir + "/" + p.gt);
    std::ofstream(out_dir + "/" + p.spec) << spec.to_text();

    SceneEntry sc;
    sc.scene_id = scene_id;
    sc.left_path = p.left;
    sc.right_hr_path = p.right_hr;
    sc.right_lr_path = p.right_lr;
    sc.right_up_path = p.right_up;
    sc.gt_path = gt ? p.gt : std::string();
    sc.spec = spec;
    return sc;
}

std::string find_image(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".png", ".ppm", ".pgm"}) {
        const fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p.string();
    }
    return {};
}

}  // namespace

Manifest simulate_dataset(const std::string& src_dir, const DegradationTemplate& tmpl,
                          const std::string& out_dir, std::uint64_t seed, int d_max,
                          const std::string& split) {
    if (!fs::is_directory(src_dir)) throw std::runtime_error("io error: not a directory: " + src_dir);

    std::vector<std::string> scene_ids;
    for (const auto& e : fs::directory_iterator(src_dir))
        if (e.is_directory()) scene_ids.push_back(e.path().filename().string());
    std::sort(scene_ids.begin(), scene_ids.end());
    if (scene_ids.empty()) throw std::runtime_error("ingestion error: no scene directories in " + src_dir);

    // Validate every scene up front and report all offenders at once.
    std::vector<std::string> problems;
    for (const auto& id : scene_ids) {
        const fs::path dir = fs::path(src_dir) / id;
        const std::string left = find_image(dir, "left");
        const std::string right = find_image(dir, "right");
        if (left.empty()) problems.push_back(id + ": missing left image");
        if (right.empty()) problems.push_back(id + ": missing right image");
        if (!left.empty() && !right.empty()) {
            const Image l = load_image(left), r = load_image(right);
            if (l.height() != r.height() || l.width() != r.width())
                problems.push_back(id + ": left/right size mismatch (pair not rectified?)");
            else if (l.height() % tmpl.scale != 0 || l.width() % tmpl.scale != 0)
                problems.push_back(id + ": size not divisible by scale " + std::to_string(tmpl.scale));
        }
    }
    if (!problems.empty()) {
        std::string msg = "ingestion error:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw std::runtime_error(msg);
    }

    fs::create_directories(out_dir);
    Manifest m;
    m.dataset = fs::path(src_dir).filename().string();
    m.split = split;
    m.d_max = d_max;
    m.root_dir = out_dir;
    for (std::size_t i = 0; i < scene_ids.size(); ++i) {
        const auto& id = scene_ids[i];
        const fs::path dir = fs::path(src_dir) / id;
        const Image left = load_image(find_image(dir, "left"));
        const Image right = load_image(find_image(dir, "right"));
        std::optional<DisparityMap> gt;
        if (fs::exists(dir / "disp_gt.pfm"))
            gt = load_disparity((dir / "disp_gt.pfm").string(), DisparityFormat::Pfm);

        const DegradationSpec spec = sample_spec(tmpl, seed + 0x9E3779B9u * (i + 1));
        m.scenes.push_back(write_scene(out_dir, id, left, right, gt ? &*gt : nullptr, spec));
    }
    save_manifest(m, out_dir + "/manifest_" + split + ".tsv");
    return m;
}

// ---- random-dot benchmark -------------------------------------------------------

namespace {

/// Continuous texture sheet: multi-octave value noise plus anti-aliased
/// discs, evaluable at arbitrary (possibly negative) x coordinates so both
/// views sample the same underlying scene exactly.
class SceneTexture {
public:
    SceneTexture(int height, int width, int x_pad, Rng& rng) : x_pad_(x_pad) {
        struct OctaveDef { int period; double weight; };
        static constexpr OctaveDef defs[] = {{32, 0.35}, {16, 0.30}, {8, 0.20}, {4, 0.15}};
        for (const auto& def : defs) {
            Octave o;
            o.period = def.period;
            o.weight = def.weight;
            o.nx = (width + x_pad + def.period - 1) / def.period + 3;
            o.ny = (height + def.period - 1) / def.period + 3;
            o.values.resize(static_cast<std::size_t>(o.nx) * o.ny);
            for (auto& v : o.values) v = uniform01(rng);
            octaves_.push_back(std::move(o));
        }
        const int n_dots = (height * width) / 600;
        for (int i = 0; i < n_dots; ++i) {
            Dot d;
            d.x = uniform(rng, -static_cast<double>(x_pad), static_cast<double>(width));
            d.y = uniform(rng, 0.0, static_cast<double>(height));
            d.radius = uniform(rng, 1.5, 3.0);
            d.intensity = uniform(rng, -0.5, 0.5);
            dots_.push_back(d);
        }
    }

    double sample(double y, double x) const {
        double v = 0;
        for (const auto& o : octaves_) {
            const double fx = (x + x_pad_) / o.period + 1.0;
            const double fy = y / o.period + 1.0;
            const int ix = static_cast<int>(std::floor(fx));
            const int iy = static_cast<int>(std::floor(fy));
            const double tx = fx - ix, ty = fy - iy;
            auto g = [&](int gy, int gx) {
                gy = std::clamp(gy, 0, o.ny - 1);
                gx = std::clamp(gx, 0, o.nx - 1);
                return o.values[static_cast<std::size_t>(gy) * o.nx + gx];
            };
            const double a = g(iy, ix) * (1 - tx) + g(iy, ix + 1) * tx;
            const double b = g(iy + 1, ix) * (1 - tx) + g(iy + 1, ix + 1) * tx;
            v += o.weight * (a * (1 - ty) + b * ty);
        }
        for (const auto& d : dots_) {
            const double dist = std::hypot(x - d.x, y - d.y);
            if (dist < d.radius + 1.0) {
                // smoothstep falloff over one pixel keeps the dot band-limited
                const double t = std::clamp(d.radius + 1.0 - dist, 0.0, 1.0);
                v += d.intensity * t * t * (3 - 2 * t);
            }
        }
        return 0.1 + 0.8 * std::clamp(v, 0.0, 1.0);
    }

private:
    struct Octave {
        int period;
        double weight;
        int nx, ny;
        std::vector<double> values;
    };
    struct Dot {
        double x, y, radius, intensity;
    };
    int x_pad_;
    std::vector<Octave> octaves_;
    std::vector<Dot> dots_;
};

DisparityMap make_disparity_field(int height, int width, int d_max, Rng& rng) {
    DisparityMap d(height, width);
    // Slanted background, then fronto-parallel rectangles drawn near to far.
    const double b0 = uniform(rng, 0.05, 0.15) * d_max;
    const double bx = uniform(rng, -0.1, 0.1) * d_max;
    const double by = uniform(rng, -0.1, 0.1) * d_max;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double v = b0 + bx * (static_cast<double>(x) / width - 0.5) +
                             by * (static_cast<double>(y) / height - 0.5);
            d.at(y, x) = std::clamp(v, 0.0, 0.3 * d_max);
        }

    const int n_rects = uniform_int(rng, 2, 4);
    std::vector<double> depths;
    for (int i = 0; i < n_rects; ++i) depths.push_back(uniform(rng, 0.4, 0.85) * d_max);
    std::sort(depths.begin(), depths.end());  // draw far-to-near so nearer wins
    for (double depth : depths) {
        const int rw = uniform_int(rng, width / 5, width / 2);
        const int rh = uniform_int(rng, height / 5, height / 2);
        const int x0 = uniform_int(rng, 0, width - rw);
        const int y0 = uniform_int(rng, 0, height - rh);
        for (int y = y0; y < y0 + rh; ++y)
            for (int x = x0; x < x0 + rw; ++x) d.at(y, x) = depth;
    }
    // float32 grid so the PFM written to disk is exactly what we computed
    for (auto& v : d.data.v) v = static_cast<float>(v);
    return d;
}

}  // namespace

Manifest make_random_dot_benchmark(int n_scenes, int height, int width, int d_max,
                                   std::uint64_t seed, const DegradationTemplate& tmpl,
                                   const std::string& out_dir, const std::string& split) {
    if (height < 64 || width < 64) throw std::invalid_argument("benchmark: size must be >= 64");
    if (n_scenes < 1) throw std::invalid_argument("benchmark: need at least one scene");
    if (height % tmpl.scale != 0 || width % tmpl.scale != 0)
        throw std::invalid_argument("benchmark: size must be divisible by the scale");

    fs::create_directories(out_dir);
    Manifest m;
    m.dataset = "randomdot";
    m.split = split;
    m.d_max = d_max;
    m.root_dir = out_dir;

    for (int i = 0; i < n_scenes; ++i) {
        Rng rng(seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(i) + 1));
        const SceneTexture tex(height, width, d_max + 4, rng);
        const DisparityMap gt = make_disparity_field(height, width, d_max, rng);

        Image right(height, width, 1);
        Image left(height, width, 1);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                right.at(0, y, x) = tex.sample(y, x);
                left.at(0, y, x) = tex.sample(y, x - gt.at(y, x));
            }

        char scene_id[32];
        std::snprintf(scene_id, sizeof(scene_id), "scene_%03d", i);
        const DegradationSpec spec = sample_spec(tmpl, seed + 0x9E3779B9u * (i + 1));
        m.scenes.push_back(write_scene(out_dir, scene_id, left, right, &gt, spec));
    }
    save_manifest(m, out_dir + "/manifest_" + split + ".tsv");
    return m;
}

// ---- cropping & batching ---------------------------------------------------------

StereoSample crop_sample(const StereoSample& s, int y0, int x0, int crop_h, int crop_w) {
    const int H = s.left.height(), W = s.left.width();
    const int scale = s.spec.scale;
    if (y0 < 0 || x0 < 0 || y0 + crop_h > H || x0 + crop_w > W)
        throw std::invalid_argument("crop_sample: crop outside image");
    if (y0 % scale != 0 || x0 % scale != 0 || crop_h % scale != 0 || crop_w % scale != 0)
        throw std::invalid_argument("crop_sample: crop not aligned to the degradation scale");

    auto crop_image = [](const Image& img, int cy, int cx, int ch, int cw) {
        Image out(ch, cw, img.channels());
        out.color = img.color;
        for (int c = 0; c < img.channels(); ++c)
            for (int y = 0; y < ch; ++y)
                for (int x = 0; x < cw; ++x) out.at(c, y, x) = img.at(c, cy + y, cx + x);
        return out;
    };

    StereoSample out;
    out.scene_id = s.scene_id;
    out.spec = s.spec;
    out.left = crop_image(s.left, y0, x0, crop_h, crop_w);
    out.right_up = crop_image(s.right_up, y0, x0, crop_h, crop_w);
    out.right_lr = crop_image(s.right_lr, y0 / scale, x0 / scale, crop_h / scale, crop_w / scale);
    if (s.right_hr) out.right_hr = crop_image(*s.right_hr, y0, x0, crop_h, crop_w);
    if (s.gt_disparity) {
        DisparityMap d(crop_h, crop_w);
        for (int y = 0; y < crop_h; ++y)
            for (int x = 0; x < crop_w; ++x) {
                // horizontal crops need no value adjustment
                d.at(y, x) = s.gt_disparity->at(y0 + y, x0 + x);
                d.set_valid(y, x, s.gt_disparity->is_valid(y0 + y, x0 + x));
            }
        out.gt_disparity = std::move(d);
    }
    return out;
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng() % i]);
}

BatchStream::BatchStream(const std::vector<StereoSample>* samples, int batch_size, int crop_h,
                         int crop_w, std::uint64_t seed, int alignment)
    : samples_(samples),
      batch_size_(batch_size),
      crop_h_(crop_h),
      crop_w_(crop_w),
      seed_(seed),
      alignment_(alignment) {
    if (!samples || samples->empty()) throw std::invalid_argument("batch stream: empty data");
    if (batch_size < 1) throw std::invalid_argument("batch stream: bad batch size");
    if (alignment < 1) throw std::invalid_argument("batch stream: bad alignment");
}

std::vector<std::vector<StereoSample>> BatchStream::epoch(int epoch_index) const {
    Rng rng(seed_ + 0x51ED2701ull * (static_cast<std::uint64_t>(epoch_index) + 1));
    std::vector<std::size_t> idx(samples_->size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    shuffle_indices(idx, rng);

    std::vector<std::vector<StereoSample>> batches;
    for (std::size_t start = 0; start < idx.size(); start += batch_size_) {
        std::vector<StereoSample> batch;
        for (std::size_t i = start; i < std::min(idx.size(), start + batch_size_); ++i) {
            const StereoSample& s = (*samples_)[idx[i]];
            const int scale = s.spec.scale;
            const int align = std::lcm(scale, alignment_);
            const int ch = std::min(crop_h_, s.left.height()) / align * align;
            const int cw = std::min(crop_w_, s.left.width()) / align * align;
            if (ch < align || cw < align)
                throw std::invalid_argument("batch stream: crop collapses below alignment");
            const int max_y = (s.left.height() - ch) / scale;
            const int max_x = (s.left.width() - cw) / scale;
            const int y0 = scale * (max_y > 0 ? uniform_int(rng, 0, max_y) : 0);
            const int x0 = scale * (max_x > 0 ? uniform_int(rng, 0, max_x) : 0);
            batch.push_back(crop_sample(s, y0, x0, ch, cw));
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

}  // namespace asymstereo
