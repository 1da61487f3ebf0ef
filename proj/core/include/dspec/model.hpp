#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dspec/graph.hpp"

namespace dspec {

struct StemSpec {
    int kernel = 3;
    int channels = 16;
    int stride = 1;
    bool maxpool = false;
};

struct StageSpec {
    int blocks = 2;
    int channels = 16;
    bool downsample = false;  // stride-2 first conv + 1x1 projection shortcut
};

/// Declarative residual-CNN description. The final dense layer emits
/// `num_classes` pre-softmax units; head partitioning happens downstream.
struct ArchitectureSpec {
    std::string preset = "desk";  // desk | paper18 | custom
    int in_channels = 2;
    StemSpec stem;
    std::vector<StageSpec> stages;
    int num_classes = 10;
    int input_size = 56;       // expected crop side length
    double dropout_rate = 0.0; // dropout before the final dense layer

    void validate() const;
};

/// Small CPU-trainable preset: 3x3 stem to 16 channels, stages
/// (2@16, 2@32 down, 2@64 down), 56x56 input.
ArchitectureSpec desk_arch(int in_channels = 2, int num_classes = 10);

/// Standard 18-layer residual topology with a native `in_channels` stem and
/// `num_classes` output units, 224x224 input.
ArchitectureSpec paper18_arch(int in_channels = 2, int num_classes = 10);

struct NormConstants {
    double image_mean = 0.3;
    double heatmap_mean = 0.0068;
};

struct TrainMeta {
    std::uint64_t seed = 0;
    int epochs = 0;
    NormConstants norm;
    std::string config_hash;
};

struct Model {
    ArchitectureSpec arch;
    Graph<float> graph;
    TrainMeta meta;
};

/// Deterministic parameter initialization given (spec, seed): He fan-in
/// normals for conv/dense kernels, batchnorm scale 1 / shift 0.
Model build_model(const ArchitectureSpec& spec, std::uint64_t seed);

/// Batched pre-softmax forward, (N, in_channels, S, S) -> (N, num_classes).
/// No softmax is applied; heads consume the raw values downstream.
Tensor<float> model_forward(Model& model, const Tensor<float>& batch, Phase phase,
                            std::uint64_t dropout_seed = 0);

/// Forward with MC-dropout forced active at `rate` on the dropout node.
Tensor<float> model_forward_mc(Model& model, const Tensor<float>& batch, double rate,
                               std::uint64_t dropout_seed);

struct ParamReport {
    struct Row {
        std::string name;
        std::string kind;
        std::int64_t params;
        std::int64_t buffers;
    };
    std::vector<Row> rows;
    std::int64_t param_count = 0;
    std::int64_t buffer_count = 0;
    /// (param_count + buffer_count) * 4: everything persists as 32-bit floats.
    std::int64_t estimated_bytes = 0;
};

ParamReport param_report(const Model& model);

} // namespace dspec
