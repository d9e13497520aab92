#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "asymstereo/image.hpp"
#include "asymstereo/rng.hpp"

namespace asymstereo {

enum class DegradationMode { BIC, IG, AG, IG_JPEG, AG_JPEG };

std::string to_string(DegradationMode m);
DegradationMode degradation_mode_from_string(const std::string& s);

struct GaussianKernelSpec {
    double sigma_x = 1.0;
    double sigma_y = 1.0;
    double theta = 0.0;  // radians
    int size = 7;        // odd, >= 3

    bool isotropic() const { return sigma_x == sigma_y && theta == 0.0; }
};

/// Fully determines LR synthesis for one scene.
struct DegradationSpec {
    int scale = 4;  // asymmetric factor s, one of {2,3,4,6,8}
    DegradationMode mode = DegradationMode::BIC;
    std::optional<GaussianKernelSpec> kernel;
    std::optional<int> jpeg_quality;  // [5,100]
    std::uint64_t rng_seed = 0;

    /// Enforces the mode/kernel/quality coupling rules; throws on violation.
    void validate() const;

    /// Flat key=value serialization, one pair per line.
    std::string to_text() const;
    static DegradationSpec from_text(const std::string& text);
    /// Single-line form with ';' separators, for manifest columns.
    std::string to_line() const;
    static DegradationSpec from_line(const std::string& line);
};

/// Per-dataset sampling ranges for spec generation. The kernel width is
/// chosen as 2*ceil(3*max(sigma))+1 to capture essentially all mass.
struct DegradationTemplate {
    DegradationMode mode = DegradationMode::BIC;
    int scale = 4;
    double ig_sigma_min = 0.6, ig_sigma_max = 2.4;
    double ag_sigma_min = 0.6, ag_sigma_max = 3.0;
    int jpeg_quality_min = 30, jpeg_quality_max = 90;
};

/// Draw a concrete per-scene spec from a template; deterministic in seed.
DegradationSpec sample_spec(const DegradationTemplate& tmpl, std::uint64_t seed);

/// Rotated bivariate Gaussian sampled at integer offsets, normalized to sum 1.
Tensor make_gaussian_kernel(const GaussianKernelSpec& spec);

/// Synthesize the LR view: BIC is anti-aliased bicubic resampling by 1/s;
/// IG/AG convolve with the kernel (reflect padding) then subsample every s-th
/// pixel starting at offset floor((s-1)/2); *_JPEG additionally encode/decode
/// JPEG at the given quality. Output values lie in [0,1]. H and W must be
/// divisible by s.
Image degrade(const Image& hr, const DegradationSpec& spec);

/// Bicubic upsampling by integer factor s (Keys a=-0.5, half-pixel centers,
/// edge clamp); the result is clipped to [0,1]. s=1 is the identity.
Image upsample_bicubic(const Image& lr, int s);

/// General separable bicubic resampler shared by degrade/upsample (a=-0.5,
/// half-pixel centers, kernel stretched and renormalized on minification).
Image bicubic_resize(const Image& src, int out_h, int out_w);

}  // namespace asymstereo
