#include "asymstereo/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace asymstereo {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// Mean over channels: [C,H,W] -> [1,H,W] via box trick would be overkill;
// done directly as a small linear op through weighted channel sum.
Var channel_mean(const Var& x) {
    const Tensor& t = x.val();
    const int C = t.shape[0];
    if (C == 1) return x;
    // Reuse weighted_sum_axis0 ([C,H,W] along axis 0), then lift back to [1,H,W].
    Var m = weighted_sum_axis0(x, std::vector<double>(static_cast<std::size_t>(C), 1.0 / C));
    return stack_maps({m});
}

}  // namespace

Var ssim_map(const Var& a, const Var& b, int window) {
    require_same_shape(a.val(), b.val(), "ssim");
    if (a.val().rank() != 3) throw std::invalid_argument("ssim: [C,H,W] inputs expected");
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("ssim: window must be odd");
    if (a.val().shape[1] < window || a.val().shape[2] < window)
        throw std::invalid_argument("ssim: image smaller than window");

    const int pad = window / 2;
    auto local_mean = [&](const Var& x) { return box_mean_valid(reflect_pad2d(x, pad), window); };

    const Var mu_a = local_mean(a);
    const Var mu_b = local_mean(b);
    const Var mu_aa = mu_a * mu_a;
    const Var mu_bb = mu_b * mu_b;
    const Var mu_ab = mu_a * mu_b;
    const Var var_a = local_mean(a * a) - mu_aa;
    const Var var_b = local_mean(b * b) - mu_bb;
    const Var cov = local_mean(a * b) - mu_ab;

    const Var num = add_scalar(mul_scalar(mu_ab, 2.0), kC1) * add_scalar(mul_scalar(cov, 2.0), kC2);
    const Var den = add_scalar(mu_aa + mu_bb, kC1) * add_scalar(var_a + var_b, kC2);
    return channel_mean(num / den);
}

Var reconstruction_loss(const Var& target, const Var& recon,
                        const std::vector<std::uint8_t>& mask, const LossConfig& cfg) {
    require_same_shape(target.val(), recon.val(), "reconstruction_loss");
    const Tensor& t = target.val();
    const std::size_t plane = static_cast<std::size_t>(t.shape[1]) * t.shape[2];
    const std::vector<std::uint8_t> all(plane, 1);
    const auto& m = mask.empty() ? all : mask;
    if (m.size() != plane) throw std::invalid_argument("reconstruction_loss: mask size mismatch");

    const Var l1 = masked_mean(vabs(target - recon), m);
    if (cfg.alpha == 0.0) return l1;
    const Var dssim = masked_mean(mul_scalar(add_scalar(mul_scalar(ssim_map(target, recon, cfg.ssim_window), -1.0), 1.0), 1.0), m);
    return l1 + mul_scalar(dssim, cfg.alpha);
}

Var smoothness_loss_graph(const Var& disparity, const Tensor& image_chw) {
    const Tensor& d = disparity.val();
    if (d.rank() != 2) throw std::invalid_argument("smoothness: [H,W] disparity expected");
    if (image_chw.rank() != 3 || image_chw.shape[1] != d.shape[0] || image_chw.shape[2] != d.shape[1])
        throw std::invalid_argument("smoothness: image/disparity shape mismatch");

    const int C = image_chw.shape[0], H = d.shape[0], W = d.shape[1];

    // exp(-|dI|) weights are constants: the image is never differentiated.
    Tensor wx({H, W - 1});
    Tensor wy({H - 1, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x + 1 < W; ++x) {
            double g = 0;
            for (int c = 0; c < C; ++c) g += std::abs(image_chw.at(c, y, x + 1) - image_chw.at(c, y, x));
            wx.at(y, x) = std::exp(-g / C);
        }
    for (int y = 0; y + 1 < H; ++y)
        for (int x = 0; x < W; ++x) {
            double g = 0;
            for (int c = 0; c < C; ++c) g += std::abs(image_chw.at(c, y + 1, x) - image_chw.at(c, y, x));
            wy.at(y, x) = std::exp(-g / C);
        }

    const Var term_x = mean_all(vabs(diff_x(disparity)) * Var::constant(std::move(wx)));
    const Var term_y = mean_all(vabs(diff_y(disparity)) * Var::constant(std::move(wy)));
    return term_x + term_y;
}

Tensor ssim(const Tensor& a, const Tensor& b, int window) {
    Tensor map = ssim_map(Var::constant(a), Var::constant(b), window).val();
    map.shape = {map.shape[1], map.shape[2]};  // drop the unit channel
    return map;
}

double photometric_loss(const Image& left, const WarpResult& warped, const LossConfig& cfg) {
    require_same_shape(left.data, warped.warped, "photometric_loss");
    const std::vector<std::uint8_t> empty;
    const auto& mask = cfg.use_warp_mask ? warped.in_bounds : empty;
    return reconstruction_loss(Var::constant(left.data), Var::constant(warped.warped), mask, cfg)
        .val()
        .v[0];
}

double feature_metric_loss(const Tensor& features_left, const Tensor& features_warped,
                           const std::vector<std::uint8_t>& full_res_mask, int stride,
                           const LossConfig& cfg) {
    require_same_shape(features_left, features_warped, "feature_metric_loss");
    std::vector<std::uint8_t> mask;
    if (cfg.use_warp_mask && !full_res_mask.empty()) {
        const int h = features_left.shape[1], w = features_left.shape[2];
        mask = downsample_mask_all_true(full_res_mask, h * stride, w * stride, stride);
    }
    return reconstruction_loss(Var::constant(features_left), Var::constant(features_warped), mask, cfg)
        .val()
        .v[0];
}

double smoothness_loss(const DisparityMap& d, const Image& left) {
    return smoothness_loss_graph(Var::constant(d.data), left.data).val().v[0];
}

double total_loss(double data_term, double smooth_term, const LossConfig& cfg) {
    return data_term + cfg.lambda * smooth_term;
}

}  // namespace asymstereo
