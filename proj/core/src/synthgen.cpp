#include "dspec/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "dspec/errors.hpp"
#include "dspec/parallel.hpp"
#include "dspec/rng.hpp"

namespace dspec {

namespace {

using nlohmann::json;

struct Ellipse {
    double cy, cx, ry, rx, angle;

    bool contains(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double u = dy * ca + dx * sa;
        const double v = -dy * sa + dx * ca;
        return (u * u) / (ry * ry) + (v * v) / (rx * rx) <= 1.0;
    }
};

// canonical unit-frame geometry: 4 chambers + 3 wall segments inside a body
// ellipse; gel outside
constexpr Ellipse kBody{0.50, 0.50, 0.47, 0.45, 0.0};
constexpr Ellipse kChambers[4] = {
    {0.30, 0.32, 0.17, 0.14, 0.0},  // RV
    {0.30, 0.68, 0.20, 0.16, 0.0},  // LV
    {0.70, 0.32, 0.15, 0.13, 0.0},  // RA
    {0.70, 0.68, 0.15, 0.14, 0.0},  // LA
};
constexpr Ellipse kWalls[3] = {
    {0.50, 0.50, 0.33, 0.045, 0.0},  // septum
    {0.52, 0.50, 0.040, 0.38, 0.0},  // annulus plane
    {0.44, 0.88, 0.28, 0.050, 0.12}, // lateral wall
};

struct Pose {
    double ty, tx;     // translation, fraction of frame
    double theta;      // radians
    double scale;
};

Pose sample_pose(const PoseRanges& pr, Rng& rng) {
    Pose p;
    p.ty = rng.uniform(-pr.translation, pr.translation);
    p.tx = rng.uniform(-pr.translation, pr.translation);
    p.theta = rng.uniform(-pr.rotation_deg, pr.rotation_deg) * 0.017453292519943295;
    p.scale = rng.uniform(pr.scale_lo, pr.scale_hi);
    return p;
}

/// canonical -> frame-fraction coordinates
std::pair<double, double> pose_forward(const Pose& p, double y, double x) {
    const double dy = (y - 0.5) * p.scale, dx = (x - 0.5) * p.scale;
    const double ca = std::cos(p.theta), sa = std::sin(p.theta);
    return {0.5 + p.ty + dy * ca - dx * sa, 0.5 + p.tx + dy * sa + dx * ca};
}

/// frame-fraction -> canonical
std::pair<double, double> pose_inverse(const Pose& p, double fy, double fx) {
    const double dy = fy - 0.5 - p.ty, dx = fx - 0.5 - p.tx;
    const double ca = std::cos(p.theta), sa = std::sin(p.theta);
    return {0.5 + (dy * ca + dx * sa) / p.scale, 0.5 + (-dy * sa + dx * ca) / p.scale};
}

/// separable box blur, edge-clamped
void box_blur(Tensor<float>& img, int radius) {
    if (radius < 1) return;
    const int h = img.dim(0), w = img.dim(1);
    Tensor<float> tmp = Tensor<float>::uninit({h, w});
    const float norm = 1.0f / static_cast<float>(2 * radius + 1);
    for (int r = 0; r < h; ++r) {
        const float* src = img.data() + static_cast<std::int64_t>(r) * w;
        float* dst = tmp.data() + static_cast<std::int64_t>(r) * w;
        for (int c = 0; c < w; ++c) {
            float acc = 0.0f;
            for (int k = -radius; k <= radius; ++k) {
                int cc = c + k;
                cc = cc < 0 ? 0 : (cc >= w ? w - 1 : cc);
                acc += src[cc];
            }
            dst[c] = acc * norm;
        }
    }
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) {
            float acc = 0.0f;
            for (int k = -radius; k <= radius; ++k) {
                int rr = r + k;
                rr = rr < 0 ? 0 : (rr >= h ? h - 1 : rr);
                acc += tmp.data()[static_cast<std::int64_t>(rr) * w + c];
            }
            img.data()[static_cast<std::int64_t>(r) * w + c] = acc * norm;
        }
    }
}

/// echogenicity map for a posed structure; `contrast` scales the deviation
/// from tissue level (1 = nominal, small = washed out)
Tensor<float> render_echo(const PhantomConfig& cfg, const Pose& pose, double contrast, bool structured) {
    const int h = cfg.native_height, w = cfg.native_width;
    const SpeckleParams& sp = cfg.speckle;
    Tensor<float> echo = Tensor<float>::uninit({h, w});
    for (int r = 0; r < h; ++r) {
        const double fy = (r + 0.5) / h;
        float* row = echo.data() + static_cast<std::int64_t>(r) * w;
        for (int c = 0; c < w; ++c) {
            double level = sp.gel;
            if (structured) {
                const double fx = (c + 0.5) / w;
                const auto [u, v] = pose_inverse(pose, fy, fx);
                if (kBody.contains(u, v)) {
                    level = sp.tissue;
                    bool in_wall = false;
                    for (const Ellipse& e : kWalls)
                        if (e.contains(u, v)) {
                            level = sp.wall;
                            in_wall = true;
                            break;
                        }
                    if (!in_wall)
                        for (const Ellipse& e : kChambers)
                            if (e.contains(u, v)) {
                                level = sp.chamber;
                                break;
                            }
                    level = sp.tissue + (level - sp.tissue) * contrast;
                }
            }
            row[c] = static_cast<float>(level);
        }
    }
    return echo;
}

Tensor<float> speckle_field(int h, int w, int radius, Rng& rng) {
    Tensor<float> field = Tensor<float>::uninit({h, w});
    for (std::int64_t i = 0; i < field.numel(); ++i)
        field[i] = static_cast<float>(rng.rayleigh_unit_mean());
    box_blur(field, radius);
    return field;
}

Tensor<float> compose_image(const PhantomConfig& cfg, const Tensor<float>& echo, Rng& rng,
                            int extra_smoothing = 0) {
    Tensor<float> noise = speckle_field(cfg.native_height, cfg.native_width,
                                        cfg.speckle.smoothing_radius + extra_smoothing, rng);
    Tensor<float> img = Tensor<float>::uninit(echo.shape());
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        double v = cfg.gain * static_cast<double>(echo[i]) * static_cast<double>(noise[i]);
        img[i] = static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
    }
    return img;
}

const ClassTemplate& template_for(const PhantomConfig& cfg, const std::string& label) {
    for (const ClassTemplate& t : cfg.templates)
        if (t.label == label) return t;
    throw ConfigError("no template for class '" + label + "'");
}

struct Sample {
    Tensor<float> image;
    double roi_row, roi_col;
    double baseline;
    Mode mode;
};

/// Pose + ROI placement with bounded pose resampling when the posed anchor
/// leaves the frame.
Sample render_anchored(const PhantomConfig& cfg, const std::string& anchor_name, double jitter,
                       Rng& rng) {
    const auto it = cfg.anchors.find(anchor_name);
    if (it == cfg.anchors.end()) throw ConfigError("unknown anchor '" + anchor_name + "'");
    const int h = cfg.native_height, w = cfg.native_width;
    for (int attempt = 0; attempt < 20; ++attempt) {
        const Pose pose = sample_pose(cfg.pose, rng);
        const auto [fy, fx] = pose_forward(pose, it->second.first, it->second.second);
        const double row = fy * h, col = fx * w;
        if (row < 0.0 || row >= h || col < 0.0 || col >= w) continue;
        Sample s;
        const double contrast = 1.0 + rng.uniform(-cfg.speckle.intensity_jitter, cfg.speckle.intensity_jitter);
        Tensor<float> echo = render_echo(cfg, pose, contrast, true);
        s.image = compose_image(cfg, echo, rng);
        s.roi_row = std::clamp(row + rng.normal(0.0, jitter), 0.0, h - 1.0);
        s.roi_col = std::clamp(col + rng.normal(0.0, jitter), 0.0, w - 1.0);
        s.baseline = 0.5;
        s.mode = Mode::CW;
        return s;
    }
    throw DataError("anchor '" + anchor_name + "' fell outside the frame for 20 consecutive poses");
}

Sample render_no(const PhantomConfig& cfg, Rng& rng) {
    Sample s;
    Tensor<float> echo = render_echo(cfg, Pose{0, 0, 0, 1}, 1.0, false);
    s.image = compose_image(cfg, echo, rng);
    s.roi_row = rng.uniform(0.0, cfg.native_height - 1.0);
    s.roi_col = rng.uniform(0.0, cfg.native_width - 1.0);
    s.baseline = rng.uniform();
    const std::int64_t pick = rng.uniform_int(0, 2);
    s.mode = pick == 0 ? Mode::CW : (pick == 1 ? Mode::PW : Mode::TVD);
    return s;
}

void degrade(const PhantomConfig& cfg, Sample& s, Rng& rng) {
    // visible structure collapses; texture blurs; attenuation bands cut in
    const DegradationParams& dp = cfg.degradation;
    const int h = s.image.dim(0), w = s.image.dim(1);
    box_blur(s.image, dp.extra_smoothing);
    float mean = 0.0f;
    for (std::int64_t i = 0; i < s.image.numel(); ++i) mean += s.image[i];
    mean /= static_cast<float>(s.image.numel());
    for (std::int64_t i = 0; i < s.image.numel(); ++i)
        s.image[i] = mean + (s.image[i] - mean) * static_cast<float>(dp.contrast_collapse);
    for (int b = 0; b < dp.bands; ++b) {
        const int band_h = static_cast<int>(rng.uniform_int(h / 16, h / 8));
        const int start = static_cast<int>(rng.uniform_int(0, h - band_h));
        for (int r = start; r < start + band_h; ++r)
            for (int c = 0; c < w; ++c)
                s.image.at(r, c) *= static_cast<float>(dp.band_gain);
    }
}

std::vector<std::string> label_universe(const PhantomConfig& cfg) {
    std::vector<std::string> labels;
    for (const ClassTemplate& t : cfg.templates) labels.push_back(t.label);
    labels.push_back("NO");
    return labels;
}

int split_total(const PhantomConfig& cfg, const std::string& split) {
    if (split == "train") return cfg.counts.train;
    if (split == "val") return cfg.counts.val;
    if (split == "test") return cfg.counts.test;
    throw ConfigError("unknown split '" + split + "' (expected train|val|test)");
}

std::uint64_t split_tag(const std::string& split) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : split) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
    return h;
}

} // namespace

BaselineRule baseline_rule_from_name(const std::string& name) {
    if (name == "any") return BaselineRule::Any;
    if (name == "negative") return BaselineRule::Negative;
    if (name == "zero") return BaselineRule::Zero;
    if (name == "positive") return BaselineRule::Positive;
    throw ConfigError("unknown baseline rule '" + name + "'");
}

const char* baseline_rule_name(BaselineRule r) {
    switch (r) {
        case BaselineRule::Any: return "any";
        case BaselineRule::Negative: return "negative";
        case BaselineRule::Zero: return "zero";
        case BaselineRule::Positive: return "positive";
    }
    return "?";
}

double sample_baseline(BaselineRule rule, Rng& rng) {
    switch (rule) {
        case BaselineRule::Any: return rng.uniform();
        case BaselineRule::Negative: return rng.uniform() * 0.5;
        case BaselineRule::Zero: return 0.5;
        case BaselineRule::Positive: return 0.5 + (1.0 - rng.uniform()) * 0.5;
    }
    return 0.5;
}

void PhantomConfig::validate() const {
    if (native_height < 16 || native_width < 16) throw ConfigError("phantom frame too small");
    if (pose.scale_lo <= 0.0 || pose.scale_hi < pose.scale_lo) throw ConfigError("invalid pose scale range");
    if (gain <= 0.0) throw ConfigError("gain must be positive");
    for (const ClassTemplate& t : templates) {
        if (!anchors.count(t.anchor))
            throw ConfigError("template '" + t.label + "' references unknown anchor '" + t.anchor + "'");
        if (t.roi_jitter < 0.0) throw ConfigError("negative roi jitter for '" + t.label + "'");
    }
    for (const ExtraAnchorSpec& e : extra_anchors) {
        if (!anchors.count(e.anchor)) throw ConfigError("extra anchor '" + e.anchor + "' is not defined");
        for (const ClassTemplate& t : templates)
            if (t.anchor == e.anchor)
                throw ConfigError("extra anchor '" + e.anchor + "' is used by class template '" + t.label + "'");
    }
    for (const auto& [name, yx] : anchors) {
        if (yx.first < 0.0 || yx.first > 1.0 || yx.second < 0.0 || yx.second > 1.0)
            throw ConfigError("anchor '" + name + "' outside the canonical frame");
    }
}

PhantomConfig desk_phantom() {
    PhantomConfig cfg;
    cfg.native_height = 128;
    cfg.native_width = 64;
    cfg.anchors = {
        {"aortic", {0.50, 0.56}},        {"mitral", {0.52, 0.70}},
        {"tricuspid", {0.52, 0.34}},     {"pulmonic", {0.16, 0.40}},
        {"pulm_vein", {0.86, 0.70}},     {"septal_annulus", {0.58, 0.48}},
        {"lateral_annulus", {0.58, 0.86}},{"rv_free_wall", {0.42, 0.12}},
        {"apex", {0.06, 0.50}},          {"lv_center", {0.30, 0.68}},
        {"atrial_septum", {0.72, 0.50}},
    };
    const double j = 2.0;
    cfg.templates = {
        {"AR", "aortic", Mode::CW, BaselineRule::Any, j},
        {"AVO", "aortic", Mode::PW, BaselineRule::Any, j},
        {"MR", "mitral", Mode::CW, BaselineRule::Any, j},
        {"MVT", "mitral", Mode::PW, BaselineRule::Any, j},
        {"PR", "pulmonic", Mode::CW, BaselineRule::Any, j},
        {"PVO", "pulmonic", Mode::PW, BaselineRule::Any, j},
        {"TR", "tricuspid", Mode::CW, BaselineRule::Negative, j},
        {"TS", "tricuspid", Mode::CW, BaselineRule::Positive, j},
        {"PV", "pulm_vein", Mode::PW, BaselineRule::Any, j},
        {"SEPTAL_E", "septal_annulus", Mode::TVD, BaselineRule::Negative, j},
        {"SEPTAL_S", "septal_annulus", Mode::TVD, BaselineRule::Zero, j},
        {"SEPTAL_A", "septal_annulus", Mode::TVD, BaselineRule::Positive, j},
        {"LATERAL_E", "lateral_annulus", Mode::TVD, BaselineRule::Negative, j},
        {"LATERAL_S", "lateral_annulus", Mode::TVD, BaselineRule::Zero, j},
        {"LATERAL_A", "lateral_annulus", Mode::TVD, BaselineRule::Positive, j},
        {"RV_E", "rv_free_wall", Mode::TVD, BaselineRule::Negative, j},
        {"RV_S", "rv_free_wall", Mode::TVD, BaselineRule::Zero, j},
        {"RV_A", "rv_free_wall", Mode::TVD, BaselineRule::Positive, j},
    };
    cfg.extra_anchors = {
        {"apex", Mode::TVD},
        {"lv_center", Mode::PW},
        {"atrial_septum", Mode::CW},
    };
    return cfg;
}

PhantomConfig paper_phantom() {
    PhantomConfig cfg = desk_phantom();
    cfg.native_height = 512;
    cfg.native_width = 256;
    for (ClassTemplate& t : cfg.templates) t.roi_jitter = 8.0;
    cfg.speckle.smoothing_radius = 2;
    cfg.counts.train = 3026;  // 90% of 3362
    cfg.counts.val = 336;     // 10% of 3362
    cfg.counts.test = 1424;
    cfg.counts.unknown = 298;
    cfg.counts.extra = 30;
    return cfg;
}

PhantomConfig site_shift(const PhantomConfig& cfg, const ShiftParams& shift) {
    if (shift.gain_factor < 0.8 || shift.gain_factor > 1.2)
        throw ConfigError("site shift gain factor outside [0.8, 1.2]");
    if (shift.pose_factor < 0.75 || shift.pose_factor > 1.25)
        throw ConfigError("site shift pose factor outside [0.75, 1.25]");
    if (shift.jitter_factor < 0.7 || shift.jitter_factor > 1.3)
        throw ConfigError("site shift jitter factor outside [0.7, 1.3]");
    PhantomConfig out = cfg;
    out.gain = cfg.gain * shift.gain_factor;
    out.pose.translation = cfg.pose.translation * shift.pose_factor;
    out.pose.rotation_deg = cfg.pose.rotation_deg * shift.pose_factor;
    out.pose.scale_lo = 1.0 - (1.0 - cfg.pose.scale_lo) * shift.pose_factor;
    out.pose.scale_hi = 1.0 + (cfg.pose.scale_hi - 1.0) * shift.pose_factor;
    for (ClassTemplate& t : out.templates) t.roi_jitter = t.roi_jitter * shift.jitter_factor;
    return out;
}

namespace {

ManifestRecord emit_sample(const PhantomConfig& cfg, const Sample& s, const std::string& label,
                           const std::string& split, int index, const std::string& out_dir) {
    namespace fs = std::filesystem;
    char name[64];
    std::snprintf(name, sizeof name, "images/%s_%05d.img", split.c_str(), index);
    write_image(s.image, (fs::path(out_dir) / name).string());
    ManifestRecord r;
    r.path = name;
    r.roi_row = s.roi_row;
    r.roi_col = s.roi_col;
    r.baseline = s.baseline;
    r.mode = s.mode;
    r.label = label;
    r.split = split;
    return r;
}

} // namespace

DatasetManifest generate_dataset(const PhantomConfig& cfg, std::uint64_t seed,
                                 const std::string& split, const std::string& out_dir) {
    cfg.validate();
    const int total = split_total(cfg, split);
    const std::vector<std::string> labels = label_universe(cfg);
    const int per = total / static_cast<int>(labels.size());
    const int rem = total % static_cast<int>(labels.size());

    std::filesystem::create_directories(std::filesystem::path(out_dir) / "images");
    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.config_hash = phantom_config_hash(cfg);
    manifest.records.resize(static_cast<std::size_t>(total));

    struct Item {
        std::string label;
        int index;
    };
    std::vector<Item> items;
    items.reserve(static_cast<std::size_t>(total));
    for (std::size_t li = 0; li < labels.size(); ++li) {
        const int count = per + (static_cast<int>(li) < rem ? 1 : 0);
        for (int k = 0; k < count; ++k) items.push_back({labels[li], 0});
    }
    for (std::size_t i = 0; i < items.size(); ++i) items[i].index = static_cast<int>(i);

    const std::uint64_t tag = split_tag(split);
    parallel_for(static_cast<std::int64_t>(items.size()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            const Item& item = items[static_cast<std::size_t>(i)];
            Rng rng(mix_seed(seed, tag, static_cast<std::uint64_t>(item.index)));
            Sample s;
            if (item.label == "NO") {
                s = render_no(cfg, rng);
            } else {
                const ClassTemplate& t = template_for(cfg, item.label);
                s = render_anchored(cfg, t.anchor, t.roi_jitter, rng);
                s.mode = t.mode;
                s.baseline = sample_baseline(t.baseline, rng);
            }
            manifest.records[static_cast<std::size_t>(item.index)] =
                emit_sample(cfg, s, item.label, split, item.index, out_dir);
        }
    });
    write_manifest(manifest, (std::filesystem::path(out_dir) / (split + ".csv")).string());
    return manifest;
}

SpecialSets generate_special_sets(const PhantomConfig& cfg, std::uint64_t seed,
                                  const std::string& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(std::filesystem::path(out_dir) / "images");
    SpecialSets out;
    out.unknown.seed = seed;
    out.unknown.config_hash = phantom_config_hash(cfg);
    out.extra.seed = seed;
    out.extra.config_hash = out.unknown.config_hash;

    out.unknown.records.resize(static_cast<std::size_t>(cfg.counts.unknown));
    const std::uint64_t utag = split_tag("unknown");
    parallel_for(cfg.counts.unknown, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            Rng rng(mix_seed(seed, utag, static_cast<std::uint64_t>(i)));
            const ClassTemplate& t = cfg.templates[static_cast<std::size_t>(i) % cfg.templates.size()];
            Sample s = render_anchored(cfg, t.anchor, t.roi_jitter, rng);
            s.mode = t.mode;
            s.baseline = sample_baseline(t.baseline, rng);
            degrade(cfg, s, rng);
            out.unknown.records[static_cast<std::size_t>(i)] =
                emit_sample(cfg, s, "UNKNOWN", "unknown", static_cast<int>(i), out_dir);
        }
    });
    write_manifest(out.unknown, (std::filesystem::path(out_dir) / "unknown.csv").string());

    out.extra.records.resize(static_cast<std::size_t>(cfg.counts.extra));
    const std::uint64_t etag = split_tag("extra");
    parallel_for(cfg.counts.extra, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            Rng rng(mix_seed(seed, etag, static_cast<std::uint64_t>(i)));
            const ExtraAnchorSpec& spec = cfg.extra_anchors[static_cast<std::size_t>(i) % cfg.extra_anchors.size()];
            Sample s = render_anchored(cfg, spec.anchor, 2.0, rng);
            s.mode = spec.mode;
            s.baseline = rng.uniform();
            out.extra.records[static_cast<std::size_t>(i)] =
                emit_sample(cfg, s, "EXTRA", "extra", static_cast<int>(i), out_dir);
        }
    });
    write_manifest(out.extra, (std::filesystem::path(out_dir) / "extra.csv").string());
    return out;
}

double structure_contrast(const Tensor<float>& image) {
    std::vector<float> vals(image.data(), image.data() + image.numel());
    const std::size_t n = vals.size();
    const std::size_t i50 = n / 2;
    const std::size_t i99 = static_cast<std::size_t>(0.99 * static_cast<double>(n));
    std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(i50), vals.end());
    const float p50 = vals[i50];
    std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(i99), vals.end());
    const float p99 = vals[std::min(i99, n - 1)];
    return static_cast<double>(p99 - p50);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

json phantom_to_json(const PhantomConfig& cfg) {
    json j;
    j["native_height"] = cfg.native_height;
    j["native_width"] = cfg.native_width;
    j["gain"] = cfg.gain;
    j["speckle"] = {{"gel", cfg.speckle.gel},
                    {"tissue", cfg.speckle.tissue},
                    {"chamber", cfg.speckle.chamber},
                    {"wall", cfg.speckle.wall},
                    {"intensity_jitter", cfg.speckle.intensity_jitter},
                    {"smoothing_radius", cfg.speckle.smoothing_radius}};
    j["pose"] = {{"translation", cfg.pose.translation},
                 {"rotation_deg", cfg.pose.rotation_deg},
                 {"scale_lo", cfg.pose.scale_lo},
                 {"scale_hi", cfg.pose.scale_hi}};
    j["degradation"] = {{"contrast_collapse", cfg.degradation.contrast_collapse},
                        {"extra_smoothing", cfg.degradation.extra_smoothing},
                        {"bands", cfg.degradation.bands},
                        {"band_gain", cfg.degradation.band_gain}};
    j["counts"] = {{"train", cfg.counts.train},
                   {"val", cfg.counts.val},
                   {"test", cfg.counts.test},
                   {"unknown", cfg.counts.unknown},
                   {"extra", cfg.counts.extra}};
    json ja = json::object();
    for (const auto& [name, yx] : cfg.anchors) ja[name] = {yx.first, yx.second};
    j["anchors"] = std::move(ja);
    j["templates"] = json::array();
    for (const ClassTemplate& t : cfg.templates)
        j["templates"].push_back({{"label", t.label},
                                  {"anchor", t.anchor},
                                  {"mode", mode_name(t.mode)},
                                  {"baseline", baseline_rule_name(t.baseline)},
                                  {"roi_jitter", t.roi_jitter}});
    j["extra_anchors"] = json::array();
    for (const ExtraAnchorSpec& e : cfg.extra_anchors)
        j["extra_anchors"].push_back({{"anchor", e.anchor}, {"mode", mode_name(e.mode)}});
    return j;
}

PhantomConfig phantom_from_json(const json& j) {
    PhantomConfig cfg;
    cfg.native_height = j.value("native_height", cfg.native_height);
    cfg.native_width = j.value("native_width", cfg.native_width);
    cfg.gain = j.value("gain", cfg.gain);
    if (j.contains("speckle")) {
        const json& s = j["speckle"];
        cfg.speckle.gel = s.value("gel", cfg.speckle.gel);
        cfg.speckle.tissue = s.value("tissue", cfg.speckle.tissue);
        cfg.speckle.chamber = s.value("chamber", cfg.speckle.chamber);
        cfg.speckle.wall = s.value("wall", cfg.speckle.wall);
        cfg.speckle.intensity_jitter = s.value("intensity_jitter", cfg.speckle.intensity_jitter);
        cfg.speckle.smoothing_radius = s.value("smoothing_radius", cfg.speckle.smoothing_radius);
    }
    if (j.contains("pose")) {
        const json& p = j["pose"];
        cfg.pose.translation = p.value("translation", cfg.pose.translation);
        cfg.pose.rotation_deg = p.value("rotation_deg", cfg.pose.rotation_deg);
        cfg.pose.scale_lo = p.value("scale_lo", cfg.pose.scale_lo);
        cfg.pose.scale_hi = p.value("scale_hi", cfg.pose.scale_hi);
    }
    if (j.contains("degradation")) {
        const json& d = j["degradation"];
        cfg.degradation.contrast_collapse = d.value("contrast_collapse", cfg.degradation.contrast_collapse);
        cfg.degradation.extra_smoothing = d.value("extra_smoothing", cfg.degradation.extra_smoothing);
        cfg.degradation.bands = d.value("bands", cfg.degradation.bands);
        cfg.degradation.band_gain = d.value("band_gain", cfg.degradation.band_gain);
    }
    if (j.contains("counts")) {
        const json& c = j["counts"];
        cfg.counts.train = c.value("train", cfg.counts.train);
        cfg.counts.val = c.value("val", cfg.counts.val);
        cfg.counts.test = c.value("test", cfg.counts.test);
        cfg.counts.unknown = c.value("unknown", cfg.counts.unknown);
        cfg.counts.extra = c.value("extra", cfg.counts.extra);
    }
    if (j.contains("anchors")) {
        cfg.anchors.clear();
        for (const auto& [name, yx] : j["anchors"].items())
            cfg.anchors[name] = {yx[0].get<double>(), yx[1].get<double>()};
    }
    if (j.contains("templates")) {
        cfg.templates.clear();
        for (const json& t : j["templates"]) {
            ClassTemplate ct;
            ct.label = t.at("label").get<std::string>();
            ct.anchor = t.at("anchor").get<std::string>();
            ct.mode = mode_from_name(t.at("mode").get<std::string>());
            ct.baseline = baseline_rule_from_name(t.value("baseline", "any"));
            ct.roi_jitter = t.value("roi_jitter", 2.0);
            cfg.templates.push_back(std::move(ct));
        }
    }
    if (j.contains("extra_anchors")) {
        cfg.extra_anchors.clear();
        for (const json& e : j["extra_anchors"])
            cfg.extra_anchors.push_back(
                {e.at("anchor").get<std::string>(), mode_from_name(e.at("mode").get<std::string>())});
    }
    return cfg;
}

} // namespace

PhantomConfig phantom_from_json_text(const std::string& text) {
    try {
        return phantom_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("phantom config: ") + e.what());
    }
}

std::string phantom_to_json_text(const PhantomConfig& cfg) {
    return phantom_to_json(cfg).dump(2) + "\n";
}

std::string phantom_config_hash(const PhantomConfig& cfg) {
    const std::string text = phantom_to_json_text(cfg);
    std::uint64_t h = 1469598103934665603ull;
    for (char c : text) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace dspec
