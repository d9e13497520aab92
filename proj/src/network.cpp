#include "asymstereo/network.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "asymstereo/rng.hpp"

namespace asymstereo {

namespace {

constexpr double kLeakySlope = 0.1;
constexpr char kCheckpointMagic[] = "ASYMSTEREO-CKPT\n";

using json = nlohmann::json;

struct ParamDef {
    std::string name;
    std::vector<int> shape;
    int fan_in;  // 0 for biases (zero-initialized)
};

std::vector<ParamDef> param_defs(const NetworkConfig& cfg) {
    const int F = cfg.feature_channels;
    const int M = cfg.head_channels;
    std::vector<ParamDef> defs;
    auto conv = [&](const std::string& name, int co, int ci) {
        defs.push_back({name + ".w", {co, ci, 3, 3}, ci * 9});
        defs.push_back({name + ".b", {co}, 0});
    };
    conv("f.in", F, cfg.input_channels);
    if (cfg.feature_stride >= 2) conv("f.down1", F, F);
    if (cfg.feature_stride >= 4) conv("f.down2", F, F);
    for (int i = 0; i < cfg.num_extractor_blocks; ++i) {
        conv("f.blk" + std::to_string(i) + ".c1", F, F);
        conv("f.blk" + std::to_string(i) + ".c2", F, F);
    }
    conv("f.out", F, F);
    conv("m.c1", M, 2 * F);
    conv("m.c2", M, M);
    conv("m.c3", 1, M);
    return defs;
}

Var p_at(const ParamVars& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw std::invalid_argument("missing parameter: " + name);
    return it->second;
}

Var conv_layer(const Var& x, const ParamVars& p, const std::string& name, int stride) {
    return conv2d(x, p_at(p, name + ".w"), p_at(p, name + ".b"), stride, 1);
}

}  // namespace

void NetworkConfig::validate() const {
    if (input_channels != 1 && input_channels != 3)
        throw std::invalid_argument("network: input_channels must be 1 or 3");
    if (feature_channels < 1 || num_extractor_blocks < 1 || head_channels < 1)
        throw std::invalid_argument("network: channel/block counts must be positive");
    if (feature_stride != 1 && feature_stride != 2 && feature_stride != 4)
        throw std::invalid_argument("network: feature_stride must be 1, 2 or 4");
    if (d_max < 1 || d_max % feature_stride != 0)
        throw std::invalid_argument("network: d_max must be positive and divisible by feature_stride");
}

NetworkParams init_params(const NetworkConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.init_seed);
    NetworkParams params;
    for (const auto& def : param_defs(cfg)) {
        Tensor t(def.shape);
        if (def.fan_in > 0) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(def.fan_in));
            for (auto& v : t.v) v = uniform(rng, -bound, bound);
        }
        params.tensors.emplace(def.name, std::move(t));
    }
    return params;
}

NetworkParams extractor_subset(const NetworkParams& params) {
    NetworkParams out;
    for (const auto& [name, t] : params.tensors)
        if (name.rfind("f.", 0) == 0) out.tensors.emplace(name, t);
    return out;
}

ParamVars make_param_vars(const NetworkParams& params, bool requires_grad) {
    ParamVars vars;
    for (const auto& [name, t] : params.tensors)
        vars.emplace(name, requires_grad ? Var::leaf(t) : Var::constant(t));
    return vars;
}

Var extract_features_graph(const Var& image, const ParamVars& p, const NetworkConfig& cfg) {
    const Tensor& t = image.val();
    if (t.rank() != 3 || t.shape[0] != cfg.input_channels)
        throw std::invalid_argument("extract_features: [C,H,W] input with config channels expected");
    if (t.shape[1] % cfg.feature_stride != 0 || t.shape[2] % cfg.feature_stride != 0)
        throw std::invalid_argument("extract_features: size not divisible by feature_stride");

    Var x = leaky_relu(conv_layer(image, p, "f.in", 1), kLeakySlope);
    if (cfg.feature_stride >= 2) x = leaky_relu(conv_layer(x, p, "f.down1", 2), kLeakySlope);
    if (cfg.feature_stride >= 4) x = leaky_relu(conv_layer(x, p, "f.down2", 2), kLeakySlope);
    for (int i = 0; i < cfg.num_extractor_blocks; ++i) {
        const std::string blk = "f.blk" + std::to_string(i);
        Var y = leaky_relu(conv_layer(x, p, blk + ".c1", 1), kLeakySlope);
        y = conv_layer(y, p, blk + ".c2", 1);
        x = leaky_relu(x + y, kLeakySlope);
    }
    return conv_layer(x, p, "f.out", 1);
}

std::vector<Var> cost_volume_slices(const Var& feat_left, const Var& feat_right,
                                    const NetworkConfig& cfg) {
    require_same_shape(feat_left.val(), feat_right.val(), "cost_volume");
    std::vector<Var> slices;
    slices.reserve(static_cast<std::size_t>(cfg.cost_levels()));
    for (int d = 0; d < cfg.cost_levels(); ++d)
        slices.push_back(concat_channels(feat_left, shift_x_clamp(feat_right, d)));
    return slices;
}

Var regress_disparity_graph(const std::vector<Var>& slices, const ParamVars& p,
                            const NetworkConfig& cfg) {
    if (static_cast<int>(slices.size()) != cfg.cost_levels())
        throw std::invalid_argument("regress_disparity: slice count mismatch");
    std::vector<Var> scores;
    scores.reserve(slices.size());
    for (const auto& s : slices) {
        Var y = leaky_relu(conv_layer(s, p, "m.c1", 1), kLeakySlope);
        y = leaky_relu(conv_layer(y, p, "m.c2", 1), kLeakySlope);
        scores.push_back(conv_layer(y, p, "m.c3", 1));
    }
    const Var volume = stack_maps(scores);
    const Var probs = softmax_axis0(mul_scalar(volume, -1.0));
    std::vector<double> hypothesis(static_cast<std::size_t>(cfg.cost_levels()));
    for (int d = 0; d < cfg.cost_levels(); ++d)
        hypothesis[static_cast<std::size_t>(d)] = static_cast<double>(d) * cfg.feature_stride;
    const Var expectation = weighted_sum_axis0(probs, hypothesis);
    if (cfg.feature_stride == 1) return expectation;
    return upsample_bilinear(expectation, cfg.feature_stride);
}

ForwardGraph forward_graph(const Var& left, const Var& right_up, const ParamVars& p,
                           const NetworkConfig& cfg) {
    ForwardGraph out;
    out.features_left = extract_features_graph(left, p, cfg);
    out.features_right = extract_features_graph(right_up, p, cfg);
    out.disparity =
        regress_disparity_graph(cost_volume_slices(out.features_left, out.features_right, cfg), p, cfg);
    return out;
}

FeatureMap extract_features(const Image& img, const NetworkParams& params, const NetworkConfig& cfg) {
    const ParamVars p = make_param_vars(params, false);
    FeatureMap fm;
    fm.data = extract_features_graph(Var::constant(img.data), p, cfg).val();
    fm.stride = cfg.feature_stride;
    return fm;
}

CostVolume build_cost_volume(const FeatureMap& feat_left, const FeatureMap& feat_right,
                             const NetworkConfig& cfg) {
    const auto slices =
        cost_volume_slices(Var::constant(feat_left.data), Var::constant(feat_right.data), cfg);
    const int D = cfg.cost_levels();
    const Tensor& s0 = slices[0].val();
    CostVolume cv;
    cv.stride = cfg.feature_stride;
    cv.data = Tensor({D, s0.shape[0], s0.shape[1], s0.shape[2]});
    const std::size_t n = s0.size();
    for (int d = 0; d < D; ++d)
        std::copy(slices[static_cast<std::size_t>(d)].val().v.begin(),
                  slices[static_cast<std::size_t>(d)].val().v.end(),
                  cv.data.v.begin() + static_cast<std::ptrdiff_t>(d) * static_cast<std::ptrdiff_t>(n));
    return cv;
}

DisparityMap regress_disparity(const CostVolume& cv, const NetworkParams& params,
                               const NetworkConfig& cfg) {
    if (cv.data.rank() != 4 || cv.data.shape[0] != cfg.cost_levels())
        throw std::invalid_argument("regress_disparity: cost volume does not match config");
    const ParamVars p = make_param_vars(params, false);
    std::vector<Var> slices;
    const std::size_t n = static_cast<std::size_t>(cv.data.shape[1]) * cv.data.shape[2] * cv.data.shape[3];
    for (int d = 0; d < cv.data.shape[0]; ++d) {
        Tensor slice({cv.data.shape[1], cv.data.shape[2], cv.data.shape[3]});
        std::copy(cv.data.v.begin() + static_cast<std::ptrdiff_t>(d * n),
                  cv.data.v.begin() + static_cast<std::ptrdiff_t>((d + 1) * n), slice.v.begin());
        slices.push_back(Var::constant(std::move(slice)));
    }
    const Tensor d = regress_disparity_graph(slices, p, cfg).val();
    DisparityMap out(d.shape[0], d.shape[1]);
    out.data = d;
    return out;
}

ForwardResult forward(const Image& left, const Image& right_up, const NetworkParams& params,
                      const NetworkConfig& cfg) {
    require_same_shape(left.data, right_up.data, "forward");
    const ParamVars p = make_param_vars(params, false);
    const ForwardGraph g =
        forward_graph(Var::constant(left.data), Var::constant(right_up.data), p, cfg);
    ForwardResult out;
    out.disparity = DisparityMap(g.disparity.val().shape[0], g.disparity.val().shape[1]);
    out.disparity.data = g.disparity.val();
    out.features_left = {g.features_left.val(), cfg.feature_stride};
    out.features_right = {g.features_right.val(), cfg.feature_stride};
    return out;
}

// ---- checkpoints ------------------------------------------------------------

namespace {

json config_to_json(const NetworkConfig& cfg) {
    return json{{"input_channels", cfg.input_channels},
                {"feature_channels", cfg.feature_channels},
                {"feature_stride", cfg.feature_stride},
                {"num_extractor_blocks", cfg.num_extractor_blocks},
                {"head_channels", cfg.head_channels},
                {"d_max", cfg.d_max},
                {"init_seed", cfg.init_seed}};
}

NetworkConfig config_from_json(const json& j) {
    NetworkConfig cfg;
    cfg.input_channels = j.at("input_channels").get<int>();
    cfg.feature_channels = j.at("feature_channels").get<int>();
    cfg.feature_stride = j.at("feature_stride").get<int>();
    cfg.num_extractor_blocks = j.at("num_extractor_blocks").get<int>();
    cfg.head_channels = j.at("head_channels").get<int>();
    cfg.d_max = j.at("d_max").get<int>();
    cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
    return cfg;
}

}  // namespace

void save_checkpoint(const NetworkParams& params, const NetworkConfig& cfg, const std::string& path) {
    json header;
    header["version"] = 1;
    header["config"] = config_to_json(cfg);
    json plist = json::array();
    for (const auto& [name, t] : params.tensors) plist.push_back({{"name", name}, {"shape", t.shape}});
    header["params"] = plist;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("io error: cannot open " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    const std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : params.tensors)
        out.write(reinterpret_cast<const char*>(t.v.data()), static_cast<std::streamsize>(t.size() * 8));
    if (!out) throw std::runtime_error("io error: write failed: " + path);
}

std::pair<NetworkParams, NetworkConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("io error: cannot open " + path);
    char magic[sizeof(kCheckpointMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, sizeof(magic)) != kCheckpointMagic)
        throw std::runtime_error("format error: not a checkpoint file: " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("format error: truncated checkpoint header");
    const json header = json::parse(hs);
    if (header.at("version").get<int>() != 1)
        throw std::runtime_error("format error: unsupported checkpoint version");

    NetworkParams params;
    for (const auto& pj : header.at("params")) {
        const std::string name = pj.at("name").get<std::string>();
        Tensor t(pj.at("shape").get<std::vector<int>>());
        in.read(reinterpret_cast<char*>(t.v.data()), static_cast<std::streamsize>(t.size() * 8));
        if (!in) throw std::runtime_error("format error: truncated checkpoint data");
        params.tensors.emplace(name, std::move(t));
    }
    return {std::move(params), config_from_json(header.at("config"))};
}

}  // namespace asymstereo
