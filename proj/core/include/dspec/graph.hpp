#pragma once

#include <string>
#include <vector>

#include "dspec/layers.hpp"
#include "dspec/tensor.hpp"

namespace dspec {

enum class LayerKind {
    Conv2d,
    BatchNorm,
    Relu,
    MaxPool2x2,
    GlobalAvgPool,
    Dense,
    ResidualAdd,
    Dropout,
};

const char* layer_kind_name(LayerKind k);

enum class Phase { Train, Eval };

/// One executed layer. `in0`/`in1` are producer node ids; -1 means the graph
/// input. Parameter order is fixed per kind:
///   Conv2d: kernel (Cout,Cin,K,K) [, bias (Cout)]
///   BatchNorm: gamma (C), beta (C); buffers: running_mean, running_var
///   Dense: weight (O,I), bias (O)
template <typename T>
struct LayerNode {
    LayerKind kind{};
    int in0 = -1;
    int in1 = -1;
    std::vector<Tensor<T>> params;
    std::vector<Tensor<T>> buffers;
    int stride = 1;
    int pad = 0;
    double rate = 0.0;  // dropout
    std::string name;
};

template <typename T>
struct Graph {
    int in_channels = 2;
    std::vector<LayerNode<T>> nodes;
    int output = -1;
};

struct ForwardOpts {
    Phase phase = Phase::Eval;
    /// Stream seed for any active dropout node this pass.
    std::uint64_t dropout_seed = 0;
    /// MC-dropout: run dropout nodes at force_rate even in eval phase.
    bool force_dropout = false;
    double force_rate = 0.0;
    /// Train phase only: fold batch statistics into the running buffers.
    bool update_bn_running = true;
    /// Scan every node output for NaN/Inf (cheap next to the convolutions).
    bool check_finite = true;
};

/// Cached activations and per-node backward state for one forward pass.
/// Backward traverses nodes in exact reverse of forward order.
template <typename T>
struct Tape {
    Tensor<T> input;
    std::vector<Tensor<T>> act;
    std::vector<Tensor<T>> saved_a;  // batchnorm: mean;   dropout: mask
    std::vector<Tensor<T>> saved_b;  // batchnorm: invstd
    std::vector<Tensor<int>> argmax; // maxpool
    bool batch_stats = false;        // whether batchnorm used batch statistics
};

template <typename T>
struct GradientSet {
    std::vector<std::vector<Tensor<T>>> params;  // [node][param], empty for parameterless nodes
    Tensor<T> input;
};

template <typename T>
const Tensor<T>& graph_forward(Graph<T>& g, const Tensor<T>& input, const ForwardOpts& opts, Tape<T>& tape);

template <typename T>
GradientSet<T> graph_backward(const Graph<T>& g, const Tape<T>& tape, const Tensor<T>& grad_output);

/// Parameter-preserving precision cast (buffers included) for 64-bit checks.
Graph<double> graph_to_double(const Graph<float>& g);

extern template struct Graph<float>;
extern template struct Graph<double>;
extern template const Tensor<float>& graph_forward(Graph<float>&, const Tensor<float>&, const ForwardOpts&, Tape<float>&);
extern template const Tensor<double>& graph_forward(Graph<double>&, const Tensor<double>&, const ForwardOpts&, Tape<double>&);
extern template GradientSet<float> graph_backward(const Graph<float>&, const Tape<float>&, const Tensor<float>&);
extern template GradientSet<double> graph_backward(const Graph<double>&, const Tape<double>&, const Tensor<double>&);

} // namespace dspec
