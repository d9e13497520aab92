#include <doctest.h>

#include <cmath>

#include "asymstereo/network.hpp"
#include "test_support.hpp"

using namespace asymstereo;
using namespace asymstereo::testing;

namespace {

NetworkConfig small_config() {
    NetworkConfig cfg;
    cfg.input_channels = 1;
    cfg.feature_channels = 8;
    cfg.feature_stride = 4;
    cfg.num_extractor_blocks = 2;
    cfg.head_channels = 8;
    cfg.d_max = 16;
    cfg.init_seed = 99;
    return cfg;
}

}  // namespace

TEST_CASE("extractor shape contract and determinism") {
    const NetworkConfig cfg = small_config();
    const NetworkParams params = init_params(cfg);
    Rng rng(1);
    const Image img = random_image(64, 64, 1, rng);

    const FeatureMap f1 = extract_features(img, params, cfg);
    CHECK(f1.channels() == 8);
    CHECK(f1.height() == 16);
    CHECK(f1.width() == 16);
    CHECK(f1.stride == 4);

    const FeatureMap f2 = extract_features(img, params, cfg);
    for (std::size_t i = 0; i < f1.data.size(); ++i) CHECK(f1.data.v[i] == f2.data.v[i]);

    const Image odd = random_image(30, 30, 1, rng);
    CHECK_THROWS_AS(extract_features(odd, params, cfg), std::invalid_argument);
}

TEST_CASE("parameter init depends only on the config") {
    const NetworkConfig cfg = small_config();
    const NetworkParams a = init_params(cfg);
    const NetworkParams b = init_params(cfg);
    CHECK(a == b);
    NetworkConfig cfg2 = cfg;
    cfg2.init_seed = 100;
    CHECK(!(a == init_params(cfg2)));
}

TEST_CASE("cost volume slices follow the shifted concatenation rule") {
    const NetworkConfig cfg = small_config();
    Rng rng(3);
    FeatureMap fl{random_tensor({8, 6, 10}, rng, -1.0, 1.0), 4};
    FeatureMap fr{random_tensor({8, 6, 10}, rng, -1.0, 1.0), 4};

    const CostVolume cv = build_cost_volume(fl, fr, cfg);
    CHECK(cv.levels() == 4);  // d_max / stride
    REQUIRE(cv.data.shape == std::vector<int>{4, 16, 6, 10});

    // slice 0 is the channel concatenation
    for (int c = 0; c < 8; ++c)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 10; ++x) {
                CHECK(cv.data.at(0, c, y, x) == fl.data.at(c, y, x));
                CHECK(cv.data.at(0, c + 8, y, x) == fr.data.at(c, y, x));
            }
    // direct indexing oracle at x >= d
    for (int d = 0; d < 4; ++d)
        for (int c = 0; c < 8; ++c)
            for (int y = 0; y < 6; ++y)
                for (int x = d; x < 10; ++x) {
                    CHECK(cv.data.at(d, c, y, x) == fl.data.at(c, y, x));
                    CHECK(cv.data.at(d, c + 8, y, x) == fr.data.at(c, y, x - d));
                }
    // border clamp below x = d
    CHECK(cv.data.at(3, 8, 0, 1) == fr.data.at(0, 0, 0));
}

TEST_CASE("soft-argmin limits: single minimum and uniform scores") {
    const NetworkConfig cfg = small_config();
    const int D = cfg.cost_levels();

    // a score volume with one extreme minimum at hypothesis k
    const int k = 2;
    std::vector<Var> slices;
    Tensor base({D, 4, 4});
    for (int d = 0; d < D; ++d)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) base.at(d, y, x) = d == k ? -60.0 : 0.0;
    const Var probs = softmax_axis0(mul_scalar(Var::constant(base), -1.0));
    std::vector<double> hyp(D);
    for (int d = 0; d < D; ++d) hyp[d] = d * cfg.feature_stride;
    const Tensor disp = weighted_sum_axis0(probs, hyp).val();
    for (double v : disp.v) CHECK(std::abs(v - k * cfg.feature_stride) < 1e-3);

    // uniform scores give the mid-range expectation
    Tensor uniform_scores({D, 4, 4}, 1.25);
    const Tensor disp_u =
        weighted_sum_axis0(softmax_axis0(mul_scalar(Var::constant(uniform_scores), -1.0)), hyp).val();
    const double mid = cfg.feature_stride * (D - 1) / 2.0;
    for (double v : disp_u.v) CHECK(v == doctest::Approx(mid).epsilon(1e-12));
}

TEST_CASE("soft-argmin equals the direct expectation oracle on random scores") {
    const NetworkConfig cfg = small_config();
    const int D = cfg.cost_levels();
    Rng rng(7);
    const Tensor scores = random_tensor({D, 5, 6}, rng, -2.0, 2.0);

    std::vector<double> hyp(D);
    for (int d = 0; d < D; ++d) hyp[d] = d * cfg.feature_stride;
    const Tensor got =
        weighted_sum_axis0(softmax_axis0(mul_scalar(Var::constant(scores), -1.0)), hyp).val();

    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) {
            double z = 0, e = 0;
            for (int d = 0; d < D; ++d) z += std::exp(-scores.at(d, y, x));
            for (int d = 0; d < D; ++d) e += hyp[d] * std::exp(-scores.at(d, y, x)) / z;
            CHECK(std::abs(got.at(y, x) - e) < 1e-6);
        }
}

TEST_CASE("forward: shapes, range, determinism") {
    const NetworkConfig cfg = small_config();
    const NetworkParams params = init_params(cfg);
    Rng rng(11);
    const Image left = random_image(32, 48, 1, rng);
    const Image right = random_image(32, 48, 1, rng);

    const ForwardResult a = forward(left, right, params, cfg);
    CHECK(a.disparity.height() == 32);
    CHECK(a.disparity.width() == 48);
    for (double v : a.disparity.data.v) {
        CHECK(v >= 0.0);
        CHECK(v <= cfg.d_max);
    }
    const ForwardResult b = forward(left, right, params, cfg);
    for (std::size_t i = 0; i < a.disparity.data.size(); ++i)
        CHECK(a.disparity.data.v[i] == b.disparity.data.v[i]);
}

TEST_CASE("extractor gradient w.r.t. a sampled weight matches finite differences") {
    NetworkConfig cfg = small_config();
    cfg.feature_stride = 2;
    cfg.d_max = 8;
    const NetworkParams params = init_params(cfg);
    Rng rng(13);
    const Image img = random_image(16, 16, 1, rng);

    const ParamVars pv = make_param_vars(params, true);
    backward(mean_all(extract_features_graph(Var::constant(img.data), pv, cfg)));

    for (const std::string name : {"f.in.w", "f.blk0.c1.w", "f.out.w", "f.down1.b"}) {
        const Tensor& w = params.tensors.at(name);
        auto f = [&](const Tensor& probe) {
            NetworkParams mod = params;
            mod.tensors.at(name) = probe;
            const ParamVars mv = make_param_vars(mod, false);
            return mean_all(extract_features_graph(Var::constant(img.data), mv, cfg)).val().v[0];
        };
        for (int k = 0; k < 4; ++k) {
            const std::size_t i = rng() % w.size();
            const double analytic = pv.at(name).grad().v[i];
            CHECK(rel_error(analytic, numeric_partial(f, w, i), 1e-6) < 1e-3);
        }
    }
}

TEST_CASE("checkpoint round trip is bitwise and forward-identical") {
    TempDir tmp("asx_network_ckpt");
    const NetworkConfig cfg = small_config();
    const NetworkParams params = init_params(cfg);
    save_checkpoint(params, cfg, tmp.file("net.ckpt"));

    const auto [loaded, loaded_cfg] = load_checkpoint(tmp.file("net.ckpt"));
    CHECK(loaded == params);
    CHECK(loaded_cfg.d_max == cfg.d_max);
    CHECK(loaded_cfg.feature_stride == cfg.feature_stride);
    CHECK(loaded_cfg.init_seed == cfg.init_seed);

    Rng rng(17);
    const Image left = random_image(32, 32, 1, rng);
    const Image right = random_image(32, 32, 1, rng);
    const ForwardResult a = forward(left, right, params, cfg);
    const ForwardResult b = forward(left, right, loaded, loaded_cfg);
    for (std::size_t i = 0; i < a.disparity.data.size(); ++i)
        CHECK(a.disparity.data.v[i] == b.disparity.data.v[i]);
}

TEST_CASE("config validation") {
    NetworkConfig cfg = small_config();
    cfg.feature_stride = 3;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.feature_stride = 4;
    cfg.d_max = 18;  // not divisible
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
