#pragma once

#include <cstdint>
#include <string>

#include "dspec/tensor.hpp"

namespace dspec {

enum class Mode { CW, PW, TVD };

const char* mode_name(Mode m);
Mode mode_from_name(const std::string& name);

/// One sample as stored on disk: a beam-space image in [0,1], the ROI
/// coordinate in native pixels, and the acquisition metadata.
struct Recording {
    Tensor<float> image;  // (H_native, W_native)
    double roi_row = 0.0;
    double roi_col = 0.0;
    double baseline = 0.5;
    Mode mode = Mode::CW;
    std::string label;  // output class name; empty for unlabeled sets
    std::string split;

    void validate() const;
};

struct PipelineConfig {
    double sigma = 10.0;        // heatmap std dev in native pixels
    int rescale_size = 256;     // S: joint rescale target (square)
    int crop_size = 224;        // C
    double image_mean = 0.3;    // subtracted from channel 0
    double heatmap_mean = 0.0068;
    bool use_heatmap = true;    // false: 1-channel image-only input

    void validate() const;
};

/// Network-ready sample before cropping: channel 0 = normalized image,
/// channel 1 = normalized heatmap, both S x S. The mode tag rides along
/// but is not a channel.
struct EncodedInput {
    Tensor<float> channels;  // (1 or 2, S, S)
    Mode mode = Mode::CW;
};

/// Unit-peak isotropic Gaussian at the ROI, rendered at native resolution:
/// value(r,c) = exp(-((r-roi_row)^2 + (c-roi_col)^2) / (2 sigma^2)).
Tensor<float> render_heatmap(double roi_row, double roi_col, int height, int width, double sigma);

/// Renders the heatmap at native dims, jointly rescales both channels to
/// S x S (bilinear, half-pixel centers), then subtracts the per-channel
/// means. Rescaling a 2:1 aspect input compresses the Gaussian vertically.
EncodedInput assemble_input(const Recording& rec, const PipelineConfig& cfg);

enum class CropMode { Center, Random };

/// Identical offsets for both channels. Random offsets are uniform over
/// [0, S-C] drawn from `seed`; center offsets are floor((S-C)/2).
Tensor<float> crop(const EncodedInput& input, int size, CropMode mode, std::uint64_t seed = 0);

/// Offsets used by crop(); exposed for geometry tests.
std::pair<int, int> crop_offsets(int rescale_size, int crop_size, CropMode mode, std::uint64_t seed);

/// Bilinear resize with half-pixel-center sampling, edge-clamped.
Tensor<float> resize_bilinear(const Tensor<float>& src, int out_h, int out_w);

} // namespace dspec
