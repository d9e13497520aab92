#pragma once

#include <optional>
#include <string>
#include <vector>

#include "asymstereo/datasets.hpp"
#include "asymstereo/losses.hpp"
#include "asymstereo/network.hpp"

namespace asymstereo {

/// The four input/loss symmetry settings. "Asy" uses the practical upsampled
/// right view, "Sym" the ground-truth HR right view (ideal cases).
///   S1 Asy input, Asy loss   S2 Sym input, Asy loss
///   S3 Asy input, Sym loss   S4 Sym input, Sym loss
enum class AblationSetting { S1, S2, S3, S4 };

std::string to_string(AblationSetting s);
AblationSetting ablation_from_string(const std::string& s);

struct TrainConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs_per_stage = 30;
    int batch_size = 2;
    int crop_h = 128;
    int crop_w = 256;
    std::uint64_t seed = 1;
    int num_boost_stages = 3;  // K; self_boost produces stages 0..K
    LossConfig loss;
    AblationSetting setting = AblationSetting::S1;
    // "Convergence" is a fixed epoch budget with an optional early stop on
    // stagnating training loss (< rel improvement over the window).
    bool early_stop = true;
    double early_stop_rel_improvement = 0.005;
    int early_stop_window = 3;
    int validate_every = 1;  // epochs between validation passes; 0 disables
    NetworkConfig network;

    void validate() const;
};

struct EpochStats {
    double train_loss = 0;
    std::optional<double> val_epe;
    std::optional<double> val_3pe;
};

/// Result of one self-boosting stage.
struct StageState {
    int stage = 0;  // k
    NetworkParams params;
    /// Extractor that defined this stage's loss; absent for stage 0 (L_pm).
    std::optional<NetworkParams> frozen_loss_extractor;
    std::vector<EpochStats> history;
    std::optional<NetworkParams> best_val_params;
    double best_val_epe = 0;
};

/// Network-input right view and warp source for the data loss, per setting.
struct AblationIo {
    const Image* input_right;
    const Image* loss_right;
};
/// Throws if the setting needs I_R and the sample does not carry it.
AblationIo configure_ablation(AblationSetting setting, const StereoSample& sample);

/// Total loss of one full (uncropped) sample under the given parameters;
/// feature-metric when a frozen extractor is supplied, photometric otherwise.
double evaluate_sample_loss(const NetworkParams& params, const NetworkParams* frozen_extractor,
                            const StereoSample& sample, const TrainConfig& cfg);

/// One optimization stage. Runs ADAM on the total loss; the data term is
/// photometric without a frozen extractor, otherwise feature-metric with the
/// frozen extractor applied to I_L and to the image-space warped view (no
/// gradient reaches the frozen parameters). Deterministic given cfg.seed.
StageState train_stage(const NetworkParams& init, const NetworkParams* frozen_extractor,
                       const std::vector<StereoSample>& train_data,
                       const std::vector<StereoSample>& val_data, const TrainConfig& cfg,
                       int stage_index, const std::string& log_path = std::string());

/// Self-boosting schedule: stage 0 trains with the photometric loss; each
/// stage k >= 1 starts from the previous parameters and trains with the
/// feature-metric loss defined by the frozen extractor of stage k-1. All
/// stage checkpoints are written to checkpoint_dir as stage_<k>.ckpt (plus
/// stage_<k>_best.ckpt when validation data is present).
std::vector<StageState> self_boost(const std::vector<StereoSample>& train_data,
                                   const std::vector<StereoSample>& val_data,
                                   const TrainConfig& cfg, const std::string& checkpoint_dir,
                                   const std::string& log_path = std::string());

/// Mean EPE / 3PE of a parameter set over samples with ground truth.
struct EvalResult {
    double mean_epe = 0;
    double mean_3pe = 0;
    std::vector<double> per_scene_epe;
    std::vector<double> per_scene_3pe;
};
EvalResult evaluate_params(const NetworkParams& params, const NetworkConfig& cfg,
                           const std::vector<StereoSample>& samples,
                           AblationSetting setting = AblationSetting::S1);

}  // namespace asymstereo
