#include <doctest.h>

#include "asymstereo/autodiff.hpp"
#include "test_support.hpp"

using namespace asymstereo;
using namespace asymstereo::testing;

namespace {

/// Finite-difference check of d(sum of weighted outputs)/d(input) for a unary
/// graph op, probing a handful of random coordinates.
void check_unary_grad(const std::function<Var(const Var&)>& op, const Tensor& input, Rng& rng,
                      double tol = 1e-6) {
    Var x = Var::leaf(input);
    Var y = op(x);
    // random linear functional of the output makes the check generic
    Tensor w = random_tensor(y.val().shape, rng, -1.0, 1.0);
    Var loss = mean_all(y * Var::constant(w));
    backward(loss);

    auto f = [&](const Tensor& probe) {
        Var xv = Var::constant(probe);
        Var yv = op(xv);
        return mean_all(yv * Var::constant(w)).val().v[0];
    };
    for (int k = 0; k < 8; ++k) {
        const std::size_t i = rng() % input.size();
        const double num = numeric_partial(f, input, i);
        CHECK(rel_error(x.grad().v[i], num) < tol);
    }
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
    Rng rng(7);
    const Tensor a = random_tensor({3, 6, 5}, rng, 0.2, 1.0);
    const Tensor b = random_tensor({3, 6, 5}, rng, 0.2, 1.0);

    check_unary_grad([&](const Var& x) { return x + Var::constant(b); }, a, rng);
    check_unary_grad([&](const Var& x) { return x - Var::constant(b); }, a, rng);
    check_unary_grad([&](const Var& x) { return x * Var::constant(b); }, a, rng);
    check_unary_grad([&](const Var& x) { return x / Var::constant(b); }, a, rng);
    check_unary_grad([&](const Var& x) { return Var::constant(b) / x; }, a, rng);
    check_unary_grad([&](const Var& x) { return vexp(mul_scalar(x, -1.3)); }, a, rng);
    check_unary_grad([&](const Var& x) { return add_scalar(x, 0.7); }, a, rng);
    check_unary_grad([&](const Var& x) { return leaky_relu(add_scalar(x, -0.5), 0.1); }, a, rng);
}

TEST_CASE("gradient accumulates when a node is reused") {
    Var x = Var::leaf(Tensor::scalar(3.0));
    Var y = x * x;  // dy/dx = 2x
    backward(mean_all(y));
    CHECK(x.grad().v[0] == doctest::Approx(6.0));
}

TEST_CASE("reductions match finite differences") {
    Rng rng(11);
    const Tensor a = random_tensor({2, 5, 4}, rng, -1.0, 1.0);
    check_unary_grad([](const Var& x) { return mean_all(x); }, a, rng);

    std::vector<std::uint8_t> mask(20, 0);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (i % 3 == 0) ? 1 : 0;
    check_unary_grad([&](const Var& x) { return masked_mean(x, mask); }, a, rng);
}

TEST_CASE("masked_mean broadcasts the mask across channels") {
    Tensor t({2, 2, 2});
    t.v = {1, 2, 3, 4, 10, 20, 30, 40};
    std::vector<std::uint8_t> mask = {1, 0, 0, 1};
    const double m = masked_mean(Var::constant(t), mask).val().v[0];
    CHECK(m == doctest::Approx((1 + 4 + 10 + 40) / 4.0));
}

TEST_CASE("masked_mean rejects an empty mask") {
    Tensor t({2, 2});
    CHECK_THROWS_AS(masked_mean(Var::constant(t), std::vector<std::uint8_t>(4, 0)),
                    std::runtime_error);
}

TEST_CASE("structural ops match finite differences") {
    Rng rng(13);
    const Tensor a = random_tensor({2, 5, 6}, rng, -1.0, 1.0);
    const Tensor b = random_tensor({3, 5, 6}, rng, -1.0, 1.0);
    const Tensor m = random_tensor({5, 6}, rng, -1.0, 1.0);

    check_unary_grad([&](const Var& x) { return concat_channels(x, Var::constant(b)); }, a, rng);
    check_unary_grad([&](const Var& x) { return shift_x_clamp(x, 2); }, a, rng);
    check_unary_grad([&](const Var& x) { return diff_x(x); }, m, rng);
    check_unary_grad([&](const Var& x) { return diff_y(x); }, m, rng);
    check_unary_grad([&](const Var& x) { return softmax_axis0(x); }, a, rng);
    check_unary_grad([&](const Var& x) { return weighted_sum_axis0(x, {0.3, -0.7}); }, a, rng);
    check_unary_grad(
        [&](const Var& x) {
            return stack_maps({diff_x(Var::constant(m)), diff_x(x)});
        },
        m, rng);
}

TEST_CASE("softmax_axis0 normalizes and orders") {
    Tensor t({3, 1, 1});
    t.v = {1.0, 3.0, 2.0};
    const Tensor s = softmax_axis0(Var::constant(t)).val();
    CHECK(s.v[0] + s.v[1] + s.v[2] == doctest::Approx(1.0));
    CHECK(s.v[1] > s.v[2]);
    CHECK(s.v[2] > s.v[0]);
}

TEST_CASE("filter ops match finite differences") {
    Rng rng(17);
    const Tensor a = random_tensor({2, 6, 7}, rng, -1.0, 1.0);
    check_unary_grad([](const Var& x) { return reflect_pad2d(x, 2); }, a, rng);
    check_unary_grad([](const Var& x) { return box_mean_valid(x, 3); }, a, rng);
}

TEST_CASE("conv2d forward matches direct summation and its gradients check out") {
    Rng rng(19);
    const Tensor x = random_tensor({2, 6, 5}, rng, -1.0, 1.0);
    const Tensor w = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
    const Tensor b = random_tensor({3}, rng, -0.5, 0.5);

    const Tensor y = conv2d(Var::constant(x), Var::constant(w), Var::constant(b), 1, 1).val();
    REQUIRE(y.shape == std::vector<int>{3, 6, 5});
    // direct correlation oracle at a few positions
    for (int probe = 0; probe < 10; ++probe) {
        const int co = static_cast<int>(rng() % 3);
        const int oy = static_cast<int>(rng() % 6);
        const int ox = static_cast<int>(rng() % 5);
        double s = b.v[co];
        for (int ci = 0; ci < 2; ++ci)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    const int sy = oy - 1 + i, sx = ox - 1 + j;
                    if (sy >= 0 && sy < 6 && sx >= 0 && sx < 5)
                        s += w.at(co, ci, i, j) * x.at(ci, sy, sx);
                }
        CHECK(y.at(co, oy, ox) == doctest::Approx(s).epsilon(1e-12));
    }

    // gradient in all three arguments
    for (int stride : {1, 2}) {
        Var xv = Var::leaf(x), wv = Var::leaf(w), bv = Var::leaf(b);
        Var out = conv2d(xv, wv, bv, stride, 1);
        const Tensor probe = random_tensor(out.val().shape, rng, -1.0, 1.0);
        backward(mean_all(out * Var::constant(probe)));

        auto fx = [&](const Tensor& t) {
            return mean_all(conv2d(Var::constant(t), Var::constant(w), Var::constant(b), stride, 1) *
                            Var::constant(probe))
                .val()
                .v[0];
        };
        auto fw = [&](const Tensor& t) {
            return mean_all(conv2d(Var::constant(x), Var::constant(t), Var::constant(b), stride, 1) *
                            Var::constant(probe))
                .val()
                .v[0];
        };
        auto fb = [&](const Tensor& t) {
            return mean_all(conv2d(Var::constant(x), Var::constant(w), Var::constant(t), stride, 1) *
                            Var::constant(probe))
                .val()
                .v[0];
        };
        for (int k = 0; k < 6; ++k) {
            const std::size_t ix = rng() % x.size();
            const std::size_t iw = rng() % w.size();
            const std::size_t ib = rng() % b.size();
            CHECK(rel_error(xv.grad().v[ix], numeric_partial(fx, x, ix)) < 1e-6);
            CHECK(rel_error(wv.grad().v[iw], numeric_partial(fw, w, iw)) < 1e-6);
            CHECK(rel_error(bv.grad().v[ib], numeric_partial(fb, b, ib)) < 1e-6);
        }
    }
}

TEST_CASE("upsample_bilinear interpolates and differentiates") {
    Rng rng(23);
    const Tensor a = random_tensor({4, 5}, rng);
    const Tensor up = upsample_bilinear(Var::constant(a), 2).val();
    REQUIRE(up.shape == std::vector<int>{8, 10});
    // constant input stays constant
    Tensor c({3, 3}, 0.4);
    const Tensor upc = upsample_bilinear(Var::constant(c), 4).val();
    for (double v : upc.v) CHECK(v == doctest::Approx(0.4));
    check_unary_grad([](const Var& x) { return upsample_bilinear(x, 3); }, a, rng);
}

TEST_CASE("warp_x gradients in src and disp match finite differences") {
    Rng rng(29);
    const Tensor src = random_tensor({2, 6, 8}, rng);
    // keep disparities fractional, away from the integer sampling knots
    Tensor disp({6, 8});
    for (auto& v : disp.v) v = uniform(rng, 0.15, 2.85);
    for (auto& v : disp.v) {
        const double frac = v - std::floor(v);
        if (frac < 0.1) v += 0.15;
        if (frac > 0.9) v -= 0.15;
    }

    Var sv = Var::leaf(src), dv = Var::leaf(disp);
    Var out = warp_x(sv, dv);
    const Tensor probe = random_tensor(out.val().shape, rng, -1.0, 1.0);
    backward(mean_all(out * Var::constant(probe)));

    auto fs = [&](const Tensor& t) {
        return mean_all(warp_x(Var::constant(t), Var::constant(disp)) * Var::constant(probe)).val().v[0];
    };
    auto fd = [&](const Tensor& t) {
        return mean_all(warp_x(Var::constant(src), Var::constant(t)) * Var::constant(probe)).val().v[0];
    };
    for (int k = 0; k < 10; ++k) {
        const std::size_t is = rng() % src.size();
        const std::size_t id = rng() % disp.size();
        CHECK(rel_error(sv.grad().v[is], numeric_partial(fs, src, is), 1e-4) < 1e-3);
        CHECK(rel_error(dv.grad().v[id], numeric_partial(fd, disp, id, 1e-4), 1e-4) < 1e-3);
    }
}
