#include "asymstereo/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "asymstereo/datasets.hpp"
#include "asymstereo/metrics.hpp"

namespace asymstereo {

double feature_psnr(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "feature_psnr");
    double lo = a.v[0], hi = a.v[0];
    for (double x : a.v) { lo = std::min(lo, x); hi = std::max(hi, x); }
    for (double x : b.v) { lo = std::min(lo, x); hi = std::max(hi, x); }

    const double range = hi - lo;
    double mse = 0;
    if (range > 0) {
        const double inv = 1.0 / range;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = (a.v[i] - b.v[i]) * inv;
            mse += d * d;
        }
        mse /= static_cast<double>(a.size());
    }
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

DisparityMap nearest_upscale(const DisparityMap& d, int stride) {
    if (stride == 1) return d;
    DisparityMap out(d.height() * stride, d.width() * stride);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            out.at(y, x) = d.at(y / stride, x / stride);
            out.set_valid(y, x, d.is_valid(y / stride, x / stride));
        }
    return out;
}

int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace

DisparityMap wta_match(const FeatureMap& feat_left, const FeatureMap& feat_right, int d_max_f) {
    require_same_shape(feat_left.data, feat_right.data, "wta_match");
    if (d_max_f < 1) throw std::invalid_argument("wta_match: d_max_f must be >= 1");
    const int C = feat_left.channels(), H = feat_left.height(), W = feat_left.width();

    DisparityMap d(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int best = 0;
            double best_cost = std::numeric_limits<double>::infinity();
            // hypotheses whose source column leaves the map are excluded
            const int d_hi = std::min(d_max_f - 1, x);
            for (int dd = 0; dd <= d_hi; ++dd) {
                double cost = 0;
                for (int c = 0; c < C; ++c) {
                    const double diff = feat_left.data.at(c, y, x) - feat_right.data.at(c, y, x - dd);
                    cost += diff * diff;
                }
                if (cost < best_cost) {  // strict: ties keep the smaller disparity
                    best_cost = cost;
                    best = dd;
                }
            }
            d.at(y, x) = best;
        }
    if (feat_left.stride > 1)
        for (auto& v : d.data.v) v *= feat_left.stride;
    return nearest_upscale(d, feat_left.stride);
}

DisparityMap patch_match_image(const Image& left, const Image& right, int patch, int d_max) {
    require_same_shape(left.data, right.data, "patch_match_image");
    if (patch < 1 || patch % 2 == 0) throw std::invalid_argument("patch_match_image: patch must be odd");
    if (d_max < 1) throw std::invalid_argument("patch_match_image: d_max must be >= 1");
    const int C = left.channels(), H = left.height(), W = left.width();
    const int r = patch / 2;

    DisparityMap d(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int best = 0;
            double best_cost = std::numeric_limits<double>::infinity();
            const int d_hi = std::min(d_max - 1, x);
            for (int dd = 0; dd <= d_hi; ++dd) {
                double cost = 0;
                for (int c = 0; c < C; ++c)
                    for (int i = -r; i <= r; ++i) {
                        const int sy = reflect_index(y + i, H);
                        for (int j = -r; j <= r; ++j) {
                            const int lx = reflect_index(x + j, W);
                            const int rx = reflect_index(x - dd + j, W);
                            const double diff = left.at(c, sy, lx) - right.at(c, sy, rx);
                            cost += diff * diff;
                        }
                    }
                if (cost < best_cost) {
                    best_cost = cost;
                    best = dd;
                }
            }
            d.at(y, x) = best;
        }
    return d;
}

SpaceReport evaluate_space(const SpaceExtractor& extractor, const std::string& label,
                           const StereoSample& sample, int d_max) {
    if (!sample.right_hr) throw std::invalid_argument("evaluate_space: sample lacks the HR right view");
    if (!sample.gt_disparity) throw std::invalid_argument("evaluate_space: sample lacks ground truth");

    SpaceReport report;
    report.space_label = label;
    if (!extractor) {
        // raw image space: pixel PSNR and 5x5 patch matching
        report.psnr_db = feature_psnr(sample.right_hr->data, sample.right_up.data);
        const DisparityMap d = patch_match_image(sample.left, sample.right_up, 5, d_max);
        report.wta_3pe_percent = three_pixel_error(d, *sample.gt_disparity);
        return report;
    }

    const FeatureMap f_hr = extractor(*sample.right_hr);
    const FeatureMap f_up = extractor(sample.right_up);
    report.psnr_db = feature_psnr(f_hr.data, f_up.data);

    const FeatureMap f_left = extractor(sample.left);
    const int d_max_f = std::max(1, (d_max + f_left.stride - 1) / f_left.stride);
    const DisparityMap d = wta_match(f_left, f_up, d_max_f);
    report.wta_3pe_percent = three_pixel_error(d, *sample.gt_disparity);
    return report;
}

}  // namespace asymstereo
