#include <doctest.h>

#include "asymstereo/geometry.hpp"
#include "test_support.hpp"

using namespace asymstereo;
using namespace asymstereo::testing;

TEST_CASE("zero disparity is the identity warp with a full mask") {
    Rng rng(3);
    const Image src = random_image(10, 14, 1, rng);
    const DisparityMap d(10, 14);

    const WarpResult r = warp_right_to_left(src, d);
    for (std::size_t i = 0; i < src.data.size(); ++i) CHECK(r.warped.v[i] == src.data.v[i]);
    for (auto m : r.in_bounds) CHECK(m == 1);
}

TEST_CASE("integer disparity shifts columns") {
    Rng rng(5);
    const Image src = random_image(6, 12, 1, rng);
    DisparityMap d(6, 12);
    for (auto& v : d.data.v) v = 1.0;

    const WarpResult r = warp_right_to_left(src, d);
    for (int y = 0; y < 6; ++y)
        for (int x = 1; x < 12; ++x)
            CHECK(r.warped.at(0, y, x) == doctest::Approx(src.at(0, y, x - 1)).epsilon(1e-12));
    // column 0 samples out of bounds
    for (int y = 0; y < 6; ++y) CHECK(r.in_bounds[static_cast<std::size_t>(y) * 12] == 0);
}

TEST_CASE("warp is linear in the source") {
    Rng rng(7);
    const Image a = random_image(8, 10, 1, rng);
    const Image b = random_image(8, 10, 1, rng);
    DisparityMap d(8, 10);
    for (auto& v : d.data.v) v = uniform(rng, 0.0, 3.0);

    Image combo(8, 10, 1);
    for (std::size_t i = 0; i < combo.data.size(); ++i)
        combo.data.v[i] = 0.3 * a.data.v[i] + 0.7 * b.data.v[i];

    const WarpResult wa = warp_right_to_left(a, d);
    const WarpResult wb = warp_right_to_left(b, d);
    const WarpResult wc = warp_right_to_left(combo, d);
    for (std::size_t i = 0; i < wc.warped.size(); ++i)
        CHECK(std::abs(wc.warped.v[i] - (0.3 * wa.warped.v[i] + 0.7 * wb.warped.v[i])) < 1e-10);
}

TEST_CASE("warped values stay within the source range on in-bounds pixels") {
    Rng rng(11);
    const Image src = random_image(9, 13, 1, rng);
    double lo = 1e9, hi = -1e9;
    for (double v : src.data.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    DisparityMap d(9, 13);
    for (auto& v : d.data.v) v = uniform(rng, 0.0, 4.0);

    const WarpResult r = warp_right_to_left(src, d);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 13; ++x)
            if (r.in_bounds[static_cast<std::size_t>(y) * 13 + x]) {
                CHECK(r.warped.at(0, y, x) >= lo - 1e-12);
                CHECK(r.warped.at(0, y, x) <= hi + 1e-12);
            }
}

TEST_CASE("warp rejects shape mismatches") {
    Rng rng(13);
    const Image src = random_image(8, 8, 1, rng);
    const DisparityMap d(8, 9);
    CHECK_THROWS_AS(warp_right_to_left(src, d), std::invalid_argument);
}

TEST_CASE("property: warp gradient w.r.t. disparity matches finite differences") {
    // random instances, disparities kept away from integer knots
    for (std::uint64_t seed : {101u, 102u, 103u, 104u, 105u}) {
        Rng rng(seed);
        const Tensor src = random_tensor({1, 8, 12}, rng);
        Tensor disp({8, 12});
        for (auto& v : disp.v) {
            v = uniform(rng, 0.15, 2.85);
            const double frac = v - std::floor(v);
            if (frac < 0.1) v += 0.12;
            if (frac > 0.9) v -= 0.12;
        }

        Var dv = Var::leaf(disp);
        Var out = warp_x(Var::constant(src), dv);
        backward(mean_all(out));

        auto f = [&](const Tensor& t) {
            return mean_all(warp_x(Var::constant(src), Var::constant(t))).val().v[0];
        };
        for (int k = 0; k < 6; ++k) {
            const std::size_t i = rng() % disp.size();
            const double num = numeric_partial(f, disp, i, 1e-4);
            CHECK(rel_error(dv.grad().v[i], num, 1e-4) < 1e-3);
        }
    }
}

TEST_CASE("mask downsampling requires every pixel of the block") {
    std::vector<std::uint8_t> mask(8 * 8, 1);
    mask[3] = 0;  // block (0,0..3) at stride 4 loses one pixel
    const auto low = downsample_mask_all_true(mask, 8, 8, 4);
    REQUIRE(low.size() == 4);
    CHECK(low[0] == 0);
    CHECK(low[1] == 1);
    CHECK(low[2] == 1);
    CHECK(low[3] == 1);
}
