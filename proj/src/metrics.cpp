#include "asymstereo/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace asymstereo {

namespace {

void check_pair(const DisparityMap& pred, const DisparityMap& gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width())
        throw std::invalid_argument("metrics: shape mismatch");
}

}  // namespace

double three_pixel_error(const DisparityMap& pred, const DisparityMap& gt) {
    check_pair(pred, gt);
    std::size_t valid = 0, bad = 0;
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            if (!gt.is_valid(y, x)) continue;
            ++valid;
            const double err = std::abs(pred.at(y, x) - gt.at(y, x));
            if (err > 3.0 && err > 0.05 * std::abs(gt.at(y, x))) ++bad;
        }
    if (valid == 0) throw std::runtime_error("degenerate input: no valid ground-truth pixels");
    return 100.0 * static_cast<double>(bad) / static_cast<double>(valid);
}

double end_point_error(const DisparityMap& pred, const DisparityMap& gt) {
    check_pair(pred, gt);
    std::size_t valid = 0;
    double sum = 0;
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            if (!gt.is_valid(y, x)) continue;
            ++valid;
            sum += std::abs(pred.at(y, x) - gt.at(y, x));
        }
    if (valid == 0) throw std::runtime_error("degenerate input: no valid ground-truth pixels");
    return sum / static_cast<double>(valid);
}

}  // namespace asymstereo
