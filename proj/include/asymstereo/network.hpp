#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "asymstereo/autodiff.hpp"
#include "asymstereo/image.hpp"

namespace asymstereo {

/// Stereo network configuration. Parameter shapes are fully determined by
/// this struct, so checkpoints are portable across runs.
struct NetworkConfig {
    int input_channels = 1;
    int feature_channels = 16;
    int feature_stride = 4;  // 1 | 2 | 4
    int num_extractor_blocks = 4;
    int head_channels = 16;
    int d_max = 64;  // cost-volume disparity range at full resolution
    std::uint64_t init_seed = 1234;

    int cost_levels() const { return d_max / feature_stride; }
    void validate() const;
};

/// Multi-channel feature tensor produced by the extractor.
struct FeatureMap {
    Tensor data;  // [C,h,w]
    int stride = 1;

    int channels() const { return data.shape[0]; }
    int height() const { return data.shape[1]; }
    int width() const { return data.shape[2]; }
};

/// Concatenation cost volume: slice d' stacks F_L with F_R shifted by d'.
struct CostVolume {
    Tensor data;  // [D, 2C, h, w]
    int stride = 1;

    int levels() const { return data.shape[0]; }
};

/// Named parameter collection for the extractor ("f.*") and matching head
/// ("m.*").
struct NetworkParams {
    std::map<std::string, Tensor> tensors;

    bool operator==(const NetworkParams& o) const { return tensors == o.tensors; }
};

/// Fan-in-scaled uniform weight init (biases zero), drawn deterministically
/// from cfg.init_seed in a fixed registration order.
NetworkParams init_params(const NetworkConfig& cfg);

/// Only the extractor parameters ("f.*"), used to freeze a loss extractor.
NetworkParams extractor_subset(const NetworkParams& params);

using ParamVars = std::map<std::string, Var>;
ParamVars make_param_vars(const NetworkParams& params, bool requires_grad);

// ---- graph builders (shared by the plain wrappers and the trainer) ---------
Var extract_features_graph(const Var& image, const ParamVars& p, const NetworkConfig& cfg);
std::vector<Var> cost_volume_slices(const Var& feat_left, const Var& feat_right,
                                    const NetworkConfig& cfg);
Var regress_disparity_graph(const std::vector<Var>& slices, const ParamVars& p,
                            const NetworkConfig& cfg);

struct ForwardGraph {
    Var disparity;  // [H,W], values in [0, d_max]
    Var features_left;
    Var features_right;
};
ForwardGraph forward_graph(const Var& left, const Var& right_up, const ParamVars& p,
                           const NetworkConfig& cfg);

// ---- plain operations -------------------------------------------------------
FeatureMap extract_features(const Image& img, const NetworkParams& params, const NetworkConfig& cfg);
CostVolume build_cost_volume(const FeatureMap& feat_left, const FeatureMap& feat_right,
                             const NetworkConfig& cfg);
DisparityMap regress_disparity(const CostVolume& cv, const NetworkParams& params,
                               const NetworkConfig& cfg);

struct ForwardResult {
    DisparityMap disparity;
    FeatureMap features_left;
    FeatureMap features_right;
};
ForwardResult forward(const Image& left, const Image& right_up, const NetworkParams& params,
                      const NetworkConfig& cfg);

// ---- checkpoints ------------------------------------------------------------
/// Self-describing container: magic, JSON header (version, config, parameter
/// descriptors), then raw little-endian float64 data. Round trips bit-exactly.
void save_checkpoint(const NetworkParams& params, const NetworkConfig& cfg, const std::string& path);
std::pair<NetworkParams, NetworkConfig> load_checkpoint(const std::string& path);

}  // namespace asymstereo
