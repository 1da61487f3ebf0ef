#pragma once

#include <map>
#include <string>
#include <vector>

#include "dspec/manifest.hpp"
#include "dspec/pipeline.hpp"
#include "dspec/rng.hpp"

namespace dspec {

/// How a class template draws its baseline value; the buckets mirror the
/// mapping scheme's intervals.
enum class BaselineRule { Any, Negative, Zero, Positive };

BaselineRule baseline_rule_from_name(const std::string& name);
const char* baseline_rule_name(BaselineRule r);
double sample_baseline(BaselineRule rule, Rng& rng);

struct ClassTemplate {
    std::string label;     // output class this template produces
    std::string anchor;    // named canonical point the ROI sits on
    Mode mode = Mode::CW;
    BaselineRule baseline = BaselineRule::Any;
    double roi_jitter = 2.0;  // Gaussian sigma in native pixels
};

struct ExtraAnchorSpec {
    std::string anchor;  // held out from every class template
    Mode mode = Mode::TVD;
};

struct PoseRanges {
    double translation = 0.15;  // fraction of the frame, each axis
    double rotation_deg = 20.0;
    double scale_lo = 0.85;
    double scale_hi = 1.15;
};

struct SpeckleParams {
    double gel = 0.08;
    double tissue = 0.40;
    double chamber = 0.12;
    double wall = 0.78;
    double intensity_jitter = 0.15;  // per-sample structure contrast jitter
    int smoothing_radius = 1;        // box radius for the multiplicative field
};

struct DegradationParams {
    double contrast_collapse = 0.08;  // structure deviation kept (SNR >> 10x down)
    int extra_smoothing = 3;          // added blur radius
    int bands = 4;                    // attenuation bands
    double band_gain = 0.55;
};

struct SplitCounts {
    int train = 2000;
    int val = 220;
    int test = 700;
    int unknown = 60;
    int extra = 30;
};

/// Procedural phantom: posed ellipse "heart" in speckle. Classes share one
/// image-generation process and differ only in where the ROI anchor sits,
/// plus the metadata their template assigns.
struct PhantomConfig {
    int native_height = 128;
    int native_width = 64;
    SpeckleParams speckle;
    PoseRanges pose;
    double gain = 1.0;
    std::map<std::string, std::pair<double, double>> anchors;  // name -> (y,x) canonical
    std::vector<ClassTemplate> templates;
    std::vector<ExtraAnchorSpec> extra_anchors;
    DegradationParams degradation;
    SplitCounts counts;

    void validate() const;
};

/// Desk-scale default: 128x64 frames, 18 class templates over 8 anchors,
/// 3 held-out anchors for the extra set.
PhantomConfig desk_phantom();

/// Same structure at the 512x256 scale with the published dataset sizes
/// (3026/336 train/val, 1424 test, 298 unknown, 30 extra).
PhantomConfig paper_phantom();

struct ShiftParams {
    double gain_factor = 1.0;    // within [0.8, 1.2]
    double pose_factor = 1.0;    // within [0.75, 1.25], scales pose ranges
    double jitter_factor = 1.0;  // within [0.7, 1.3], scales ROI jitter
};

/// Distribution-shifted copy for separate-site test generation.
PhantomConfig site_shift(const PhantomConfig& cfg, const ShiftParams& shift);

/// Renders one split to `out_dir` (images under images/, manifest at
/// <split>.csv) and returns the manifest. Deterministic in (cfg, seed).
DatasetManifest generate_dataset(const PhantomConfig& cfg, std::uint64_t seed,
                                 const std::string& split, const std::string& out_dir);

struct SpecialSets {
    DatasetManifest unknown;
    DatasetManifest extra;
};

/// unknown: degraded class samples (labels UNKNOWN); extra: well-formed
/// samples on held-out anchors (labels EXTRA).
SpecialSets generate_special_sets(const PhantomConfig& cfg, std::uint64_t seed,
                                  const std::string& out_dir);

/// Blind structure-visibility statistic: p99 - p50 of the pixel intensities.
/// Degraded (unknown-set) frames score below the clean distribution.
double structure_contrast(const Tensor<float>& image);

/// Stable hash of the full config, recorded in manifests.
std::string phantom_config_hash(const PhantomConfig& cfg);

PhantomConfig phantom_from_json_text(const std::string& text);
std::string phantom_to_json_text(const PhantomConfig& cfg);

} // namespace dspec
