#pragma once

#include <functional>
#include <optional>
#include <string>

#include "asymstereo/image.hpp"
#include "asymstereo/network.hpp"

namespace asymstereo {

struct StereoSample;  // datasets module

/// Feature-space scores for one scene: how robust a space is to the
/// degradation (PSNR between features of the clean and degraded right view)
/// and how well it supports direct matching (WTA 3PE against ground truth).
struct SpaceReport {
    std::string space_label;
    double psnr_db = 0;        // +inf when the two maps are identical
    double wta_3pe_percent = 0;
};

/// PSNR after jointly min-max normalizing the concatenation of both maps to
/// [0,1]: 10*log10(1/MSE). Identical inputs give +inf.
double feature_psnr(const Tensor& a, const Tensor& b);

/// Winner-takes-all matching under the Euclidean feature distance: for each
/// location the disparity in [0, d_max_f) with minimal cost, hypotheses whose
/// source column falls outside the map excluded, ties toward the smallest
/// disparity. Computed at the feature stride, then values are scaled by the
/// stride and nearest-upsampled to full resolution.
DisparityMap wta_match(const FeatureMap& feat_left, const FeatureMap& feat_right, int d_max_f);

/// WTA over sums of squared differences of patch x patch windows
/// (reflect-padded), full resolution, ties toward the smallest disparity.
DisparityMap patch_match_image(const Image& left, const Image& right, int patch, int d_max);

/// Feature extractor under evaluation; empty means the raw image space
/// (pixel PSNR plus 5x5 patch matching).
using SpaceExtractor = std::function<FeatureMap(const Image&)>;

/// The degradation-agnostic score uses (I_R, I_r_up); the matching-specific
/// score matches (I_L, I_r_up) against ground-truth disparity. The sample
/// must carry I_R and ground truth.
SpaceReport evaluate_space(const SpaceExtractor& extractor, const std::string& label,
                           const StereoSample& sample, int d_max);

}  // namespace asymstereo
