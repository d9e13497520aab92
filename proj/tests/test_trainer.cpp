#include <doctest.h>

#include <cmath>

#include "asymstereo/trainer.hpp"
#include "test_support.hpp"

using namespace asymstereo;
using namespace asymstereo::testing;

namespace {

TrainConfig desk_config() {
    TrainConfig cfg;
    cfg.network.input_channels = 1;
    cfg.network.feature_channels = 8;
    cfg.network.feature_stride = 4;
    cfg.network.num_extractor_blocks = 2;
    cfg.network.head_channels = 8;
    cfg.network.d_max = 16;
    cfg.crop_h = 32;
    cfg.crop_w = 64;
    cfg.batch_size = 1;
    cfg.epochs_per_stage = 1;
    cfg.num_boost_stages = 1;
    cfg.early_stop = false;
    cfg.validate_every = 0;
    return cfg;
}

std::vector<StereoSample> tiny_dataset(const TempDir& tmp, int n_scenes, std::uint64_t seed) {
    const DegradationTemplate tmpl{DegradationMode::BIC, 4};
    const Manifest m =
        make_random_dot_benchmark(n_scenes, 32, 64, 12, seed, tmpl, tmp.str(), "train");
    return load_all_samples(m);
}

}  // namespace

TEST_CASE("configure_ablation wires the four settings") {
    TempDir tmp("asx_trainer_ablation");
    auto samples = tiny_dataset(tmp, 1, 3);
    StereoSample& s = samples[0];

    const AblationIo s1 = configure_ablation(AblationSetting::S1, s);
    CHECK(s1.input_right == &s.right_up);
    CHECK(s1.loss_right == &s.right_up);

    const AblationIo s2 = configure_ablation(AblationSetting::S2, s);
    CHECK(s2.input_right == &*s.right_hr);
    CHECK(s2.loss_right == &s.right_up);

    const AblationIo s3 = configure_ablation(AblationSetting::S3, s);
    CHECK(s3.input_right == s1.input_right);  // same input pair as S1
    CHECK(s3.loss_right == &*s.right_hr);

    const AblationIo s4 = configure_ablation(AblationSetting::S4, s);
    CHECK(s4.input_right == &*s.right_hr);
    CHECK(s4.loss_right == &*s.right_hr);

    s.right_hr.reset();
    CHECK_NOTHROW(configure_ablation(AblationSetting::S1, s));
    CHECK_THROWS_AS(configure_ablation(AblationSetting::S3, s), std::invalid_argument);
}

TEST_CASE("zero epochs returns the initial parameters bitwise") {
    TempDir tmp("asx_trainer_noop");
    const auto samples = tiny_dataset(tmp, 2, 5);
    TrainConfig cfg = desk_config();
    cfg.epochs_per_stage = 0;
    const NetworkParams init = init_params(cfg.network);
    const StageState st = train_stage(init, nullptr, samples, {}, cfg, 0);
    CHECK(st.params == init);
}

TEST_CASE("one optimization step reduces the sample loss for most seeds") {
    TempDir tmp("asx_trainer_descent");
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto samples = tiny_dataset(tmp, 1, 1000 + seed);
        TrainConfig cfg = desk_config();
        cfg.learning_rate = 1e-4;
        cfg.seed = seed;
        cfg.network.init_seed = seed;

        const NetworkParams init = init_params(cfg.network);
        const double before = evaluate_sample_loss(init, nullptr, samples[0], cfg);
        const StageState st = train_stage(init, nullptr, samples, {}, cfg, 0);
        const double after = evaluate_sample_loss(st.params, nullptr, samples[0], cfg);
        if (after < before) ++improved;
    }
    CHECK(improved >= 18);
}

TEST_CASE("the frozen extractor is bit-identical before and after training") {
    TempDir tmp("asx_trainer_freeze");
    const auto samples = tiny_dataset(tmp, 2, 7);
    TrainConfig cfg = desk_config();
    cfg.epochs_per_stage = 2;

    const NetworkParams init = init_params(cfg.network);
    const NetworkParams frozen = extractor_subset(init);
    const NetworkParams frozen_copy = frozen;
    const StageState st = train_stage(init, &frozen, samples, {}, cfg, 1);
    CHECK(frozen == frozen_copy);
    REQUIRE(st.frozen_loss_extractor.has_value());
    CHECK(*st.frozen_loss_extractor == frozen_copy);
    // the trained parameters did move
    CHECK(!(st.params == init));
}

TEST_CASE("self_boost schedule: K+1 stages, frozen handoff, checkpoints") {
    TempDir tmp("asx_trainer_boost");
    const auto samples = tiny_dataset(tmp, 2, 9);
    TrainConfig cfg = desk_config();
    cfg.num_boost_stages = 1;  // K=1 -> exactly 2 stage states

    const auto states = self_boost(samples, {}, cfg, tmp.file("ckpt"));
    REQUIRE(states.size() == 2);
    CHECK(states[0].stage == 0);
    CHECK(states[1].stage == 1);
    CHECK_FALSE(states[0].frozen_loss_extractor.has_value());
    REQUIRE(states[1].frozen_loss_extractor.has_value());
    // stage 1's loss extractor is stage 0's trained theta_F, bitwise
    CHECK(*states[1].frozen_loss_extractor == extractor_subset(states[0].params));

    // stage 1 resumed from stage 0's final parameters: re-running the stage
    // reproduces it exactly
    TrainConfig stage_cfg = cfg;
    stage_cfg.network.init_seed = cfg.seed;
    const NetworkParams frozen = extractor_subset(states[0].params);
    const StageState redo = train_stage(states[0].params, &frozen, samples, {}, stage_cfg, 1);
    CHECK(redo.params == states[1].params);

    const auto [p0, c0] = load_checkpoint(tmp.file("ckpt") + "/stage_0.ckpt");
    const auto [p1, c1] = load_checkpoint(tmp.file("ckpt") + "/stage_1.ckpt");
    CHECK(p0 == states[0].params);
    CHECK(p1 == states[1].params);
}

TEST_CASE("training is deterministic under a fixed seed") {
    TempDir tmp("asx_trainer_determinism");
    const auto samples = tiny_dataset(tmp, 3, 11);
    TrainConfig cfg = desk_config();
    cfg.epochs_per_stage = 2;
    cfg.batch_size = 2;
    cfg.seed = 42;

    const auto a = self_boost(samples, {}, cfg, "");
    const auto b = self_boost(samples, {}, cfg, "");
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].params == b[i].params);
}

TEST_CASE("validation tracks the best parameters") {
    TempDir tmp("asx_trainer_val");
    const auto samples = tiny_dataset(tmp, 2, 13);
    TrainConfig cfg = desk_config();
    cfg.epochs_per_stage = 2;
    cfg.validate_every = 1;
    const StageState st = train_stage(init_params(cfg.network), nullptr, samples, samples, cfg, 0);
    REQUIRE(st.history.size() == 2);
    CHECK(st.history[0].val_epe.has_value());
    CHECK(st.best_val_params.has_value());
    CHECK(st.best_val_epe > 0.0);
}

TEST_CASE("empty training data is rejected") {
    TrainConfig cfg = desk_config();
    CHECK_THROWS_AS(train_stage(init_params(cfg.network), nullptr, {}, {}, cfg, 0),
                    std::invalid_argument);
}

TEST_CASE("train log lines are appended per epoch") {
    TempDir tmp("asx_trainer_log");
    const auto samples = tiny_dataset(tmp, 1, 15);
    TrainConfig cfg = desk_config();
    cfg.epochs_per_stage = 2;
    train_stage(init_params(cfg.network), nullptr, samples, {}, cfg, 0, tmp.file("log.tsv"));

    std::ifstream in(tmp.file("log.tsv"));
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
}
