#pragma once

#include <cstdint>
#include <vector>

#include "asymstereo/autodiff.hpp"
#include "asymstereo/geometry.hpp"
#include "asymstereo/image.hpp"

namespace asymstereo {

struct LossConfig {
    double alpha = 3.0;         // SSIM weight in the data terms
    double lambda = 0.1;        // smoothness weight in the total loss
    int ssim_window = 3;        // odd
    bool use_warp_mask = true;  // restrict data terms to in-bounds pixels
};

// Differentiable graph versions. Inputs are [C,H,W] Vars (mask pixels refer
// to the H,W plane); each returns a scalar Var.

/// Per-pixel SSIM map, channel-averaged: [C,H,W] x [C,H,W] -> [1,H,W].
/// Local statistics are window x window means over reflect-padded inputs;
/// C1 = 0.01^2, C2 = 0.03^2 on the [0,1] scale.
Var ssim_map(const Var& a, const Var& b, int window);

/// mean |a - b| + alpha * mean(1 - SSIM(a,b)), means over mask-true pixels
/// (all pixels when mask is empty).
Var reconstruction_loss(const Var& target, const Var& recon,
                        const std::vector<std::uint8_t>& mask, const LossConfig& cfg);

/// Edge-aware smoothness: mean |dx d| * exp(-|dx I|) + mean |dy d| * exp(-|dy I|),
/// with forward differences and image gradients averaged over channels.
Var smoothness_loss_graph(const Var& disparity, const Tensor& image_chw);

// Plain evaluations used by tests, diagnostics and the CLI. These wrap the
// graph versions on constants, so there is a single code path.

Tensor ssim(const Tensor& a, const Tensor& b, int window);  // [C,H,W] -> [H,W]

double photometric_loss(const Image& left, const WarpResult& warped, const LossConfig& cfg);

/// Feature-space reconstruction error. Both inputs live at feature stride;
/// the full-resolution warp mask is pooled (all-true) down to that stride.
double feature_metric_loss(const Tensor& features_left, const Tensor& features_warped,
                           const std::vector<std::uint8_t>& full_res_mask, int stride,
                           const LossConfig& cfg);

double smoothness_loss(const DisparityMap& d, const Image& left);

double total_loss(double data_term, double smooth_term, const LossConfig& cfg);

}  // namespace asymstereo
