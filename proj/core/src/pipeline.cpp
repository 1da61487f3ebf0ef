#include "dspec/pipeline.hpp"

#include <cmath>

#include "dspec/errors.hpp"
#include "dspec/rng.hpp"

namespace dspec {

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::CW: return "CW";
        case Mode::PW: return "PW";
        case Mode::TVD: return "TVD";
    }
    return "?";
}

Mode mode_from_name(const std::string& name) {
    if (name == "CW") return Mode::CW;
    if (name == "PW") return Mode::PW;
    if (name == "TVD") return Mode::TVD;
    throw DataError("unknown mode '" + name + "' (expected CW, PW, or TVD)");
}

void Recording::validate() const {
    if (image.rank() != 2) throw DataError("recording image must be rank 2, got " + shape_str(image.shape()));
    const int h = image.dim(0), w = image.dim(1);
    if (!(roi_row >= 0.0 && roi_row < h))
        throw DataError("roi_row " + std::to_string(roi_row) + " outside [0," + std::to_string(h) + ")");
    if (!(roi_col >= 0.0 && roi_col < w))
        throw DataError("roi_col " + std::to_string(roi_col) + " outside [0," + std::to_string(w) + ")");
    if (!(baseline >= 0.0 && baseline <= 1.0))
        throw DataError("baseline " + std::to_string(baseline) + " outside [0,1]");
}

void PipelineConfig::validate() const {
    if (sigma <= 0.0) throw ConfigError("heatmap sigma must be positive");
    if (rescale_size < 2) throw ConfigError("rescale size too small");
    if (crop_size > rescale_size)
        throw ConfigError("crop size " + std::to_string(crop_size) + " exceeds rescale size " +
                          std::to_string(rescale_size));
}

Tensor<float> render_heatmap(double roi_row, double roi_col, int height, int width, double sigma) {
    if (!(roi_row >= 0.0 && roi_row < height && roi_col >= 0.0 && roi_col < width))
        throw DataError("heatmap ROI (" + std::to_string(roi_row) + "," + std::to_string(roi_col) +
                        ") outside " + std::to_string(height) + "x" + std::to_string(width));
    Tensor<float> out({height, width});
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int r = 0; r < height; ++r) {
        const double dr = (r - roi_row) * (r - roi_row);
        float* row = out.data() + static_cast<std::int64_t>(r) * width;
        for (int c = 0; c < width; ++c) {
            const double dc = (c - roi_col) * (c - roi_col);
            row[c] = static_cast<float>(std::exp(-(dr + dc) * inv));
        }
    }
    return out;
}

Tensor<float> resize_bilinear(const Tensor<float>& src, int out_h, int out_w) {
    const int h = src.dim(0), w = src.dim(1);
    Tensor<float> dst({out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        if (fy < 0.0) fy = 0.0;
        if (fy > h - 1) fy = h - 1;
        const int y0 = static_cast<int>(fy);
        const int y1 = y0 + 1 < h ? y0 + 1 : y0;
        const float wy = static_cast<float>(fy - y0);
        for (int ox = 0; ox < out_w; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            if (fx < 0.0) fx = 0.0;
            if (fx > w - 1) fx = w - 1;
            const int x0 = static_cast<int>(fx);
            const int x1 = x0 + 1 < w ? x0 + 1 : x0;
            const float wx = static_cast<float>(fx - x0);
            const float top = src.at(y0, x0) * (1.0f - wx) + src.at(y0, x1) * wx;
            const float bot = src.at(y1, x0) * (1.0f - wx) + src.at(y1, x1) * wx;
            dst.at(oy, ox) = top * (1.0f - wy) + bot * wy;
        }
    }
    return dst;
}

EncodedInput assemble_input(const Recording& rec, const PipelineConfig& cfg) {
    rec.validate();
    cfg.validate();
    const int s = cfg.rescale_size;
    EncodedInput out;
    out.mode = rec.mode;
    const int n_channels = cfg.use_heatmap ? 2 : 1;
    out.channels = Tensor<float>({n_channels, s, s});

    Tensor<float> image = resize_bilinear(rec.image, s, s);
    for (std::int64_t i = 0; i < image.numel(); ++i)
        out.channels[i] = image[i] - static_cast<float>(cfg.image_mean);

    if (cfg.use_heatmap) {
        Tensor<float> heat = render_heatmap(rec.roi_row, rec.roi_col, rec.image.dim(0), rec.image.dim(1), cfg.sigma);
        Tensor<float> scaled = resize_bilinear(heat, s, s);
        float* dst = out.channels.data() + static_cast<std::int64_t>(s) * s;
        for (std::int64_t i = 0; i < scaled.numel(); ++i)
            dst[i] = scaled[i] - static_cast<float>(cfg.heatmap_mean);
    }
    return out;
}

std::pair<int, int> crop_offsets(int rescale_size, int crop_size, CropMode mode, std::uint64_t seed) {
    if (crop_size > rescale_size)
        throw ConfigError("crop size " + std::to_string(crop_size) + " exceeds rescale size " +
                          std::to_string(rescale_size));
    const int span = rescale_size - crop_size;
    if (mode == CropMode::Center) return {span / 2, span / 2};
    Rng rng(mix_seed(seed, 0x63726f70ull));
    const int off_r = static_cast<int>(rng.uniform_int(0, span));
    const int off_c = static_cast<int>(rng.uniform_int(0, span));
    return {off_r, off_c};
}

Tensor<float> crop(const EncodedInput& input, int size, CropMode mode, std::uint64_t seed) {
    const int channels = input.channels.dim(0);
    const int s = input.channels.dim(1);
    const auto [off_r, off_c] = crop_offsets(s, size, mode, seed);
    Tensor<float> out({channels, size, size});
    for (int ch = 0; ch < channels; ++ch) {
        const float* src = input.channels.data() + static_cast<std::int64_t>(ch) * s * s;
        float* dst = out.data() + static_cast<std::int64_t>(ch) * size * size;
        for (int r = 0; r < size; ++r) {
            const float* srow = src + static_cast<std::int64_t>(off_r + r) * s + off_c;
            float* drow = dst + static_cast<std::int64_t>(r) * size;
            for (int c = 0; c < size; ++c) drow[c] = srow[c];
        }
    }
    return out;
}

} // namespace dspec
