#pragma once

#include "asymstereo/image.hpp"

namespace asymstereo {

/// KITTI bad-pixel rate in percent: a pixel is bad iff its error exceeds
/// 3 px AND 5% of the ground-truth magnitude. Only valid gt pixels count;
/// throws on zero valid pixels.
double three_pixel_error(const DisparityMap& pred, const DisparityMap& gt);

/// Mean absolute disparity error over valid gt pixels.
double end_point_error(const DisparityMap& pred, const DisparityMap& gt);

}  // namespace asymstereo
