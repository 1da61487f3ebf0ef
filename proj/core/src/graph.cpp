#include "dspec/graph.hpp"

#include "dspec/errors.hpp"
#include "dspec/rng.hpp"

namespace dspec {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool2x2: return "maxpool2x2";
        case LayerKind::GlobalAvgPool: return "global_avg_pool";
        case LayerKind::Dense: return "dense";
        case LayerKind::ResidualAdd: return "residual_add";
        case LayerKind::Dropout: return "dropout";
    }
    return "?";
}

namespace {

constexpr double kBnMomentum = 0.1;
constexpr double kBnEps = 1e-5;

template <typename T>
const Tensor<T>& input_of(const Tape<T>& tape, int ref) {
    return ref < 0 ? tape.input : tape.act[static_cast<std::size_t>(ref)];
}

template <typename T>
void check_shape_4d(const LayerNode<T>& node, const Tensor<T>& x) {
    if (x.rank() != 4)
        throw ConfigError(std::string(layer_kind_name(node.kind)) + " node '" + node.name +
                          "' expects an N,C,H,W input, got rank " + std::to_string(x.rank()));
}

template <typename T>
void accumulate(Tensor<T>& dst, Tensor<T>&& src) {
    if (dst.empty()) {
        dst = std::move(src);
        return;
    }
    for (std::int64_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
}

} // namespace

template <typename T>
const Tensor<T>& graph_forward(Graph<T>& g, const Tensor<T>& input, const ForwardOpts& opts, Tape<T>& tape) {
    const std::size_t n_nodes = g.nodes.size();
    if (input.rank() == 4) {
        if (input.dim(1) != g.in_channels)
            throw ConfigError("graph input must be N," + std::to_string(g.in_channels) +
                              ",H,W; got " + shape_str(input.shape()));
    } else if (input.rank() != 2) {
        throw ConfigError("graph input must be rank 4 (feature maps) or rank 2 (dense), got " +
                          shape_str(input.shape()));
    }
    tape.input = input;
    tape.act.assign(n_nodes, Tensor<T>());
    tape.saved_a.assign(n_nodes, Tensor<T>());
    tape.saved_b.assign(n_nodes, Tensor<T>());
    tape.argmax.assign(n_nodes, Tensor<int>());
    tape.batch_stats = opts.phase == Phase::Train;

    for (std::size_t i = 0; i < n_nodes; ++i) {
        LayerNode<T>& node = g.nodes[i];
        const Tensor<T>& x = input_of(tape, node.in0);
        Tensor<T>& y = tape.act[i];
        switch (node.kind) {
            case LayerKind::Conv2d: {
                check_shape_4d(node, x);
                const Tensor<T>& kernel = node.params[0];
                if (kernel.dim(1) != x.dim(1))
                    throw ConfigError("conv2d node '" + node.name + "' kernel expects " +
                                      std::to_string(kernel.dim(1)) + " input channels, got " +
                                      std::to_string(x.dim(1)));
                const int K = kernel.dim(2);
                const int Ho = conv_out_dim(x.dim(2), K, node.stride, node.pad);
                const int Wo = conv_out_dim(x.dim(3), K, node.stride, node.pad);
                if (Ho <= 0 || Wo <= 0)
                    throw ConfigError("conv2d node '" + node.name + "' output would be empty for input " +
                                      shape_str(x.shape()));
                y = Tensor<T>::uninit({x.dim(0), kernel.dim(0), Ho, Wo});
                const Tensor<T>* bias = node.params.size() > 1 ? &node.params[1] : nullptr;
                conv2d_forward(x, kernel, bias, node.stride, node.pad, y);
                break;
            }
            case LayerKind::BatchNorm: {
                check_shape_4d(node, x);
                const int C = x.dim(1);
                if (node.params[0].numel() != C)
                    throw ConfigError("batchnorm node '" + node.name + "' has " +
                                      std::to_string(node.params[0].numel()) + " channels, input has " +
                                      std::to_string(C));
                y = Tensor<T>::uninit(x.shape());
                tape.saved_a[i] = Tensor<T>({C});
                tape.saved_b[i] = Tensor<T>({C});
                const bool batch_stats = opts.phase == Phase::Train;
                batchnorm_forward(x, node.params[0], node.params[1], node.buffers[0], node.buffers[1],
                                  batch_stats, batch_stats && opts.update_bn_running,
                                  kBnMomentum, kBnEps, y, tape.saved_a[i], tape.saved_b[i]);
                break;
            }
            case LayerKind::Relu: {
                y = Tensor<T>::uninit(x.shape());
                relu_forward(x, y);
                break;
            }
            case LayerKind::MaxPool2x2: {
                check_shape_4d(node, x);
                if (x.dim(2) < 2 || x.dim(3) < 2)
                    throw ConfigError("maxpool2x2 node '" + node.name + "' input too small: " +
                                      shape_str(x.shape()));
                y = Tensor<T>::uninit({x.dim(0), x.dim(1), x.dim(2) / 2, x.dim(3) / 2});
                tape.argmax[i] = Tensor<int>::uninit(y.shape());
                maxpool2x2_forward(x, y, tape.argmax[i]);
                break;
            }
            case LayerKind::GlobalAvgPool: {
                check_shape_4d(node, x);
                y = Tensor<T>::uninit({x.dim(0), x.dim(1)});
                global_avg_pool_forward(x, y);
                break;
            }
            case LayerKind::Dense: {
                if (x.rank() != 2)
                    throw ConfigError("dense node '" + node.name + "' expects an N,I input, got " +
                                      shape_str(x.shape()));
                if (node.params[0].dim(1) != x.dim(1))
                    throw ConfigError("dense node '" + node.name + "' weight expects " +
                                      std::to_string(node.params[0].dim(1)) + " inputs, got " +
                                      std::to_string(x.dim(1)));
                y = Tensor<T>::uninit({x.dim(0), node.params[0].dim(0)});
                dense_forward(x, node.params[0], node.params[1], y);
                break;
            }
            case LayerKind::ResidualAdd: {
                const Tensor<T>& a = x;
                const Tensor<T>& b = input_of(tape, node.in1);
                if (a.shape() != b.shape())
                    throw ConfigError("residual_add node '" + node.name + "' branch shapes differ: " +
                                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
                y = Tensor<T>::uninit(a.shape());
                for (std::int64_t j = 0; j < a.numel(); ++j) y[j] = a[j] + b[j];
                break;
            }
            case LayerKind::Dropout: {
                const bool active = opts.force_dropout
                                        ? opts.force_rate > 0.0
                                        : (opts.phase == Phase::Train && node.rate > 0.0);
                if (!active) {
                    y = x;
                    break;
                }
                const double rate = opts.force_dropout ? opts.force_rate : node.rate;
                if (rate < 0.0 || rate >= 1.0)
                    throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
                y = Tensor<T>::uninit(x.shape());
                tape.saved_a[i] = Tensor<T>::uninit(x.shape());
                Rng rng(mix_seed(opts.dropout_seed, 0x6472u /* per-node stream */, i));
                dropout_forward(x, rate, rng, y, tape.saved_a[i]);
                break;
            }
        }
        if (opts.check_finite && !y.all_finite())
            throw NumericError(std::string("non-finite output from ") + layer_kind_name(node.kind) +
                               " node '" + node.name + "'");
    }
    return tape.act[static_cast<std::size_t>(g.output)];
}

template <typename T>
GradientSet<T> graph_backward(const Graph<T>& g, const Tape<T>& tape, const Tensor<T>& grad_output) {
    const std::size_t n_nodes = g.nodes.size();
    if (tape.act.size() != n_nodes)
        throw UsageError("backward called before forward: tape is empty or stale");

    GradientSet<T> out;
    out.params.assign(n_nodes, {});
    std::vector<Tensor<T>> gact(n_nodes);
    Tensor<T> ginput;
    gact[static_cast<std::size_t>(g.output)] = grad_output;

    for (std::size_t ri = n_nodes; ri-- > 0;) {
        const LayerNode<T>& node = g.nodes[ri];
        Tensor<T>& gy = gact[ri];
        if (gy.empty()) continue;  // dead branch
        const Tensor<T>& x = input_of(tape, node.in0);
        Tensor<T>& sink0 = node.in0 < 0 ? ginput : gact[static_cast<std::size_t>(node.in0)];

        switch (node.kind) {
            case LayerKind::Conv2d: {
                Tensor<T> gx = Tensor<T>::uninit(x.shape());
                conv2d_backward_input(gy, node.params[0], node.stride, node.pad, gx);
                out.params[ri].emplace_back(node.params[0].shape());
                Tensor<T>* gbias = nullptr;
                if (node.params.size() > 1) {
                    out.params[ri].emplace_back(node.params[1].shape());
                    gbias = &out.params[ri][1];
                }
                conv2d_backward_params(x, gy, node.stride, node.pad, out.params[ri][0], gbias);
                accumulate(sink0, std::move(gx));
                break;
            }
            case LayerKind::BatchNorm: {
                Tensor<T> gx = Tensor<T>::uninit(x.shape());
                out.params[ri].emplace_back(node.params[0].shape());
                out.params[ri].emplace_back(node.params[1].shape());
                batchnorm_backward(x, node.params[0], tape.saved_a[ri], tape.saved_b[ri], gy,
                                   tape.batch_stats, gx, out.params[ri][0], out.params[ri][1]);
                accumulate(sink0, std::move(gx));
                break;
            }
            case LayerKind::Relu: {
                Tensor<T> gx = Tensor<T>::uninit(x.shape());
                relu_backward(x, gy, gx);
                accumulate(sink0, std::move(gx));
                break;
            }
            case LayerKind::MaxPool2x2: {
                Tensor<T> gx = Tensor<T>::uninit(x.shape());
                maxpool2x2_backward(tape.argmax[ri], gy, gx);
                accumulate(sink0, std::move(gx));
                break;
            }
            case LayerKind::GlobalAvgPool: {
                Tensor<T> gx = Tensor<T>::uninit(x.shape());
                global_avg_pool_backward(gy, gx);
                accumulate(sink0, std::move(gx));
                break;
            }
            case LayerKind::Dense: {
                Tensor<T> gx = Tensor<T>::uninit(x.shape());
                out.params[ri].emplace_back(node.params[0].shape());
                out.params[ri].emplace_back(node.params[1].shape());
                dense_backward(x, node.params[0], gy, gx, out.params[ri][0], out.params[ri][1]);
                accumulate(sink0, std::move(gx));
                break;
            }
            case LayerKind::ResidualAdd: {
                Tensor<T>& sink1 = node.in1 < 0 ? ginput : gact[static_cast<std::size_t>(node.in1)];
                Tensor<T> gy_copy = gy;
                accumulate(sink0, std::move(gy_copy));
                accumulate(sink1, std::move(gy));
                break;
            }
            case LayerKind::Dropout: {
                if (tape.saved_a[ri].empty()) {
                    accumulate(sink0, std::move(gy));  // was identity
                } else {
                    Tensor<T> gx = Tensor<T>::uninit(x.shape());
                    dropout_backward(tape.saved_a[ri], gy, gx);
                    accumulate(sink0, std::move(gx));
                }
                break;
            }
        }
    }
    out.input = ginput.empty() ? Tensor<T>(tape.input.shape()) : std::move(ginput);
    return out;
}

Graph<double> graph_to_double(const Graph<float>& g) {
    Graph<double> out;
    out.in_channels = g.in_channels;
    out.output = g.output;
    out.nodes.reserve(g.nodes.size());
    for (const LayerNode<float>& n : g.nodes) {
        LayerNode<double> d;
        d.kind = n.kind;
        d.in0 = n.in0;
        d.in1 = n.in1;
        d.stride = n.stride;
        d.pad = n.pad;
        d.rate = n.rate;
        d.name = n.name;
        for (const Tensor<float>& p : n.params) d.params.push_back(p.cast<double>());
        for (const Tensor<float>& b : n.buffers) d.buffers.push_back(b.cast<double>());
        out.nodes.push_back(std::move(d));
    }
    return out;
}

template struct Graph<float>;
template struct Graph<double>;
template const Tensor<float>& graph_forward(Graph<float>&, const Tensor<float>&, const ForwardOpts&, Tape<float>&);
template const Tensor<double>& graph_forward(Graph<double>&, const Tensor<double>&, const ForwardOpts&, Tape<double>&);
template GradientSet<float> graph_backward(const Graph<float>&, const Tape<float>&, const Tensor<float>&);
template GradientSet<double> graph_backward(const Graph<double>&, const Tape<double>&, const Tensor<double>&);

} // namespace dspec
