#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asymstereo/degradation.hpp"
#include "asymstereo/image.hpp"
#include "asymstereo/rng.hpp"

namespace asymstereo {

/// One scene of a resolution-asymmetric stereo dataset.
struct StereoSample {
    Image left;                                // I_L, HR
    Image right_lr;                            // I_r, H/s x W/s
    Image right_up;                            // I_r upsampled back to HR grid
    std::optional<Image> right_hr;             // ground-truth HR right view (simulation only)
    std::optional<DisparityMap> gt_disparity;  // for the left view
    DegradationSpec spec;
    std::string scene_id;
};

struct SceneEntry {
    std::string scene_id;
    std::string left_path;
    std::string right_hr_path;  // may be empty
    std::string right_lr_path;
    std::string right_up_path;
    std::string gt_path;  // may be empty
    DegradationSpec spec;
};

/// Tab-separated scene index with a flat key=value header. All paths are
/// relative to the manifest's directory.
struct Manifest {
    std::string dataset;
    std::string split;  // train | test
    int d_max = 64;
    std::string root_dir;
    std::vector<SceneEntry> scenes;
};

void save_manifest(const Manifest& m, const std::string& path);

enum class VerifyMode {
    None,    // trust the files
    Warn,    // drop failing scenes with a warning
    Strict,  // throw on the first failure
};

/// Load and validate a manifest: every referenced file must exist, and for
/// scenes carrying the HR right view the degradation is re-run to confirm
/// degrade(I_R, spec) reproduces I_r at 8-bit precision.
Manifest load_manifest(const std::string& path, VerifyMode verify = VerifyMode::Strict);

StereoSample load_sample(const Manifest& m, std::size_t index);
std::vector<StereoSample> load_all_samples(const Manifest& m);

/// Simulate an asymmetric dataset from rectified HR pairs. src_dir holds one
/// subdirectory per scene with left.png and right.png (plus optional
/// disp_gt.pfm); per-scene degradation specs are drawn from the template.
/// Deterministic in seed. Missing or indivisible inputs raise an ingestion
/// error listing every offender.
Manifest simulate_dataset(const std::string& src_dir, const DegradationTemplate& tmpl,
                          const std::string& out_dir, std::uint64_t seed, int d_max,
                          const std::string& split = "train");

/// Hermetic desk-scale benchmark: textured random-dot scenes rendered from a
/// continuous texture sheet, piecewise-smooth ground-truth disparity
/// (fronto-parallel rectangles over a slanted background), right views exact
/// by construction, then degraded per the template.
Manifest make_random_dot_benchmark(int n_scenes, int height, int width, int d_max,
                                   std::uint64_t seed, const DegradationTemplate& tmpl,
                                   const std::string& out_dir, const std::string& split = "train");

/// Aligned random crop; the origin is snapped to multiples of the sample's
/// degradation scale so the LR view stays an exact subgrid.
StereoSample crop_sample(const StereoSample& s, int y0, int x0, int crop_h, int crop_w);

/// Deterministic epoch batching: seeded shuffle, then aligned random crops.
/// Crop sizes are snapped down to multiples of lcm(scale, alignment) so both
/// the LR subgrid and the consumer's stride divide them. An epoch over n
/// samples with batch size b yields ceil(n/b) batches.
class BatchStream {
public:
    BatchStream(const std::vector<StereoSample>* samples, int batch_size, int crop_h, int crop_w,
                std::uint64_t seed, int alignment = 1);

    std::vector<std::vector<StereoSample>> epoch(int epoch_index) const;

private:
    const std::vector<StereoSample>* samples_;
    int batch_size_, crop_h_, crop_w_;
    std::uint64_t seed_;
    int alignment_;
};

/// Hand-rolled Fisher-Yates so shuffles do not depend on the standard
/// library's std::shuffle implementation.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng);

}  // namespace asymstereo
