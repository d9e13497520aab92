#include "asymstereo/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "asymstereo/geometry.hpp"
#include "asymstereo/metrics.hpp"

namespace asymstereo {

std::string to_string(AblationSetting s) {
    switch (s) {
        case AblationSetting::S1: return "S1";
        case AblationSetting::S2: return "S2";
        case AblationSetting::S3: return "S3";
        case AblationSetting::S4: return "S4";
    }
    throw std::logic_error("unreachable");
}

AblationSetting ablation_from_string(const std::string& s) {
    if (s == "S1") return AblationSetting::S1;
    if (s == "S2") return AblationSetting::S2;
    if (s == "S3") return AblationSetting::S3;
    if (s == "S4") return AblationSetting::S4;
    throw std::invalid_argument("unknown ablation setting: " + s);
}

void TrainConfig::validate() const {
    network.validate();
    if (learning_rate <= 0) throw std::invalid_argument("train: learning_rate must be positive");
    if (epochs_per_stage < 0) throw std::invalid_argument("train: epochs_per_stage must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (num_boost_stages < 1) throw std::invalid_argument("train: K must be >= 1");
    if (crop_h < 8 || crop_w < 8) throw std::invalid_argument("train: crop too small");
    if (loss.alpha < 0 || loss.lambda < 0) throw std::invalid_argument("train: loss weights must be >= 0");
}

AblationIo configure_ablation(AblationSetting setting, const StereoSample& sample) {
    const bool needs_hr = setting != AblationSetting::S1;
    if (needs_hr && !sample.right_hr)
        throw std::invalid_argument("ablation " + to_string(setting) + " requires the HR right view");
    AblationIo io{};
    switch (setting) {
        case AblationSetting::S1: io = {&sample.right_up, &sample.right_up}; break;
        case AblationSetting::S2: io = {&*sample.right_hr, &sample.right_up}; break;
        case AblationSetting::S3: io = {&sample.right_up, &*sample.right_hr}; break;
        case AblationSetting::S4: io = {&*sample.right_hr, &*sample.right_hr}; break;
    }
    return io;
}

namespace {

Image match_channels(const Image& img, int channels) {
    if (img.channels() == channels) return img;
    if (channels == 1) return to_grayscale(img);
    throw std::invalid_argument("train: sample channel count does not match the network config");
}

/// Total loss graph for one sample. Photometric when frozen is null,
/// feature-metric otherwise (the frozen extractor encodes I_L and the warped
/// view; gradients reach the trained network only through the disparity).
Var sample_loss_graph(const ParamVars& params, const ParamVars* frozen, const StereoSample& sample,
                      const TrainConfig& cfg) {
    const AblationIo io = configure_ablation(cfg.setting, sample);
    const Image left = match_channels(sample.left, cfg.network.input_channels);
    const Image input_right = match_channels(*io.input_right, cfg.network.input_channels);
    const Image loss_right = match_channels(*io.loss_right, cfg.network.input_channels);

    const Var left_v = Var::constant(left.data);
    const ForwardGraph g = forward_graph(left_v, Var::constant(input_right.data), params, cfg.network);

    const Var warped = warp_x(Var::constant(loss_right.data), g.disparity);
    std::vector<std::uint8_t> mask;
    if (cfg.loss.use_warp_mask) mask = warp_x_in_bounds(g.disparity.val());

    Var data_term;
    if (!frozen) {
        data_term = reconstruction_loss(left_v, warped, mask, cfg.loss);
    } else {
        const Var feat_left = extract_features_graph(left_v, *frozen, cfg.network);
        const Var feat_warped = extract_features_graph(warped, *frozen, cfg.network);
        std::vector<std::uint8_t> feat_mask;
        if (!mask.empty())
            feat_mask = downsample_mask_all_true(mask, left.height(), left.width(),
                                                 cfg.network.feature_stride);
        data_term = reconstruction_loss(feat_left, feat_warped, feat_mask, cfg.loss);
    }

    const Var smooth = smoothness_loss_graph(g.disparity, left.data);
    return data_term + mul_scalar(smooth, cfg.loss.lambda);
}

struct AdamState {
    std::map<std::string, Tensor> m, v;
    long t = 0;
};

void adam_step(NetworkParams& params, const ParamVars& vars, AdamState& state,
               const TrainConfig& cfg) {
    ++state.t;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, state.t);
    const double corr2 = 1.0 - std::pow(b2, state.t);
    for (auto& [name, p] : params.tensors) {
        const VarNodePtr node = vars.at(name).node();
        Tensor& m = state.m.try_emplace(name, Tensor(p.shape)).first->second;
        Tensor& v = state.v.try_emplace(name, Tensor(p.shape)).first->second;
        const bool has_grad = node->grad_ready;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = has_grad ? node->grad.v[i] : 0.0;
            m.v[i] = b1 * m.v[i] + (1 - b1) * g;
            v.v[i] = b2 * v.v[i] + (1 - b2) * g * g;
            const double mh = m.v[i] / corr1;
            const double vh = v.v[i] / corr2;
            p.v[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
        }
    }
}

EvalResult evaluate_impl(const NetworkParams& params, const NetworkConfig& net,
                         const std::vector<StereoSample>& samples, AblationSetting setting) {
    EvalResult r;
    int counted = 0;
    for (const auto& s : samples) {
        if (!s.gt_disparity) continue;
        const AblationIo io = configure_ablation(setting, s);
        const Image left = match_channels(s.left, net.input_channels);
        const Image right = match_channels(*io.input_right, net.input_channels);
        const ForwardResult fwd = forward(left, right, params, net);
        r.per_scene_epe.push_back(end_point_error(fwd.disparity, *s.gt_disparity));
        r.per_scene_3pe.push_back(three_pixel_error(fwd.disparity, *s.gt_disparity));
        r.mean_epe += r.per_scene_epe.back();
        r.mean_3pe += r.per_scene_3pe.back();
        ++counted;
    }
    if (counted == 0) throw std::invalid_argument("evaluate: no samples with ground truth");
    r.mean_epe /= counted;
    r.mean_3pe /= counted;
    return r;
}

}  // namespace

double evaluate_sample_loss(const NetworkParams& params, const NetworkParams* frozen_extractor,
                            const StereoSample& sample, const TrainConfig& cfg) {
    const ParamVars pv = make_param_vars(params, false);
    std::optional<ParamVars> fv;
    if (frozen_extractor) fv = make_param_vars(*frozen_extractor, false);
    return sample_loss_graph(pv, fv ? &*fv : nullptr, sample, cfg).val().v[0];
}

StageState train_stage(const NetworkParams& init, const NetworkParams* frozen_extractor,
                       const std::vector<StereoSample>& train_data,
                       const std::vector<StereoSample>& val_data, const TrainConfig& cfg,
                       int stage_index, const std::string& log_path) {
    cfg.validate();
    if (train_data.empty()) throw std::invalid_argument("train_stage: empty training data");

    StageState state;
    state.stage = stage_index;
    state.params = init;
    if (frozen_extractor) state.frozen_loss_extractor = *frozen_extractor;

    std::optional<ParamVars> frozen_vars;
    if (frozen_extractor) frozen_vars = make_param_vars(*frozen_extractor, false);

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::app);
        if (!log) throw std::runtime_error("io error: cannot open log " + log_path);
    }

    const BatchStream stream(&train_data, cfg.batch_size, cfg.crop_h, cfg.crop_w,
                             cfg.seed + 0x9E3779B97F4A7C15ull * (stage_index + 1),
                             cfg.network.feature_stride);
    AdamState adam;
    bool has_best = false;

    for (int epoch = 0; epoch < cfg.epochs_per_stage; ++epoch) {
        double epoch_loss = 0;
        int n_batches = 0;
        for (const auto& batch : stream.epoch(epoch)) {
            const ParamVars pv = make_param_vars(state.params, true);
            Var loss;
            for (const auto& sample : batch) {
                const Var l = sample_loss_graph(pv, frozen_vars ? &*frozen_vars : nullptr, sample, cfg);
                loss = loss.defined() ? loss + l : l;
            }
            loss = mul_scalar(loss, 1.0 / static_cast<double>(batch.size()));
            const double value = loss.val().v[0];
            if (!std::isfinite(value)) {
                std::ostringstream os;
                os << "training diverged: non-finite loss at stage " << stage_index << " epoch "
                   << epoch << " batch " << n_batches << " (scene " << batch.front().scene_id << ")";
                throw std::runtime_error(os.str());
            }
            backward(loss);
            adam_step(state.params, pv, adam, cfg);
            epoch_loss += value;
            ++n_batches;
        }

        EpochStats stats;
        stats.train_loss = epoch_loss / std::max(n_batches, 1);
        if (!val_data.empty() && cfg.validate_every > 0 && (epoch + 1) % cfg.validate_every == 0) {
            const EvalResult ev = evaluate_impl(state.params, cfg.network, val_data, cfg.setting);
            stats.val_epe = ev.mean_epe;
            stats.val_3pe = ev.mean_3pe;
            if (!has_best || ev.mean_epe < state.best_val_epe) {
                has_best = true;
                state.best_val_epe = ev.mean_epe;
                state.best_val_params = state.params;
            }
        }
        state.history.push_back(stats);
        if (log) {
            log << stage_index << '\t' << epoch << '\t' << stats.train_loss << '\t'
                << (stats.val_epe ? std::to_string(*stats.val_epe) : "-") << '\t'
                << (stats.val_3pe ? std::to_string(*stats.val_3pe) : "-") << '\n'
                << std::flush;
        }

        if (cfg.early_stop && static_cast<int>(state.history.size()) > cfg.early_stop_window) {
            const double before =
                state.history[state.history.size() - 1 - cfg.early_stop_window].train_loss;
            const double now = state.history.back().train_loss;
            if (before > 0 && (before - now) / before < cfg.early_stop_rel_improvement) break;
        }
    }
    return state;
}

std::vector<StageState> self_boost(const std::vector<StereoSample>& train_data,
                                   const std::vector<StereoSample>& val_data,
                                   const TrainConfig& cfg, const std::string& checkpoint_dir,
                                   const std::string& log_path) {
    cfg.validate();
    if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

    auto persist = [&](const StageState& st) {
        if (checkpoint_dir.empty()) return;
        save_checkpoint(st.params, cfg.network,
                        checkpoint_dir + "/stage_" + std::to_string(st.stage) + ".ckpt");
        if (st.best_val_params)
            save_checkpoint(*st.best_val_params, cfg.network,
                            checkpoint_dir + "/stage_" + std::to_string(st.stage) + "_best.ckpt");
    };

    NetworkConfig net = cfg.network;
    net.init_seed = cfg.seed;
    TrainConfig stage_cfg = cfg;
    stage_cfg.network = net;

    std::vector<StageState> states;
    states.push_back(
        train_stage(init_params(net), nullptr, train_data, val_data, stage_cfg, 0, log_path));
    persist(states.back());

    for (int k = 1; k <= cfg.num_boost_stages; ++k) {
        const NetworkParams frozen = extractor_subset(states.back().params);
        states.push_back(train_stage(states.back().params, &frozen, train_data, val_data, stage_cfg,
                                     k, log_path));
        persist(states.back());
    }
    return states;
}

EvalResult evaluate_params(const NetworkParams& params, const NetworkConfig& cfg,
                           const std::vector<StereoSample>& samples, AblationSetting setting) {
    return evaluate_impl(params, cfg, samples, setting);
}

}  // namespace asymstereo
