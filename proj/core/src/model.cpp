#include "dspec/model.hpp"

#include <cmath>

#include "dspec/errors.hpp"
#include "dspec/rng.hpp"

namespace dspec {

void ArchitectureSpec::validate() const {
    if (in_channels != 1 && in_channels != 2)
        throw ConfigError("architecture input channels must be 1 or 2, got " + std::to_string(in_channels));
    if (num_classes < 1) throw ConfigError("architecture needs at least one output class");
    if (stem.channels < 1 || stem.kernel < 1 || stem.stride < 1)
        throw ConfigError("invalid stem configuration");
    if (stages.empty()) throw ConfigError("architecture needs at least one stage");
    for (const StageSpec& s : stages) {
        if (s.blocks < 1) throw ConfigError("stage block count must be positive");
        if (s.channels < 1) throw ConfigError("stage channel width must be positive");
    }
    if (input_size < 8) throw ConfigError("input size too small: " + std::to_string(input_size));
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("dropout rate must be in [0,1)");
}

ArchitectureSpec desk_arch(int in_channels, int num_classes) {
    ArchitectureSpec spec;
    spec.preset = "desk";
    spec.in_channels = in_channels;
    spec.stem = {3, 16, 1, false};
    spec.stages = {{2, 16, false}, {2, 32, true}, {2, 64, true}};
    spec.num_classes = num_classes;
    spec.input_size = 56;
    return spec;
}

ArchitectureSpec paper18_arch(int in_channels, int num_classes) {
    ArchitectureSpec spec;
    spec.preset = "paper18";
    spec.in_channels = in_channels;
    spec.stem = {7, 64, 2, true};
    spec.stages = {{2, 64, false}, {2, 128, true}, {2, 256, true}, {2, 512, true}};
    spec.num_classes = num_classes;
    spec.input_size = 224;
    return spec;
}

namespace {

Tensor<float> he_init(const Shape& shape, std::int64_t fan_in, Rng& rng) {
    Tensor<float> t(shape);
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.normal(0.0, std));
    return t;
}

struct Builder {
    Graph<float>& g;
    Rng& rng;
    int last = -1;

    int add(LayerNode<float> node) {
        g.nodes.push_back(std::move(node));
        last = static_cast<int>(g.nodes.size()) - 1;
        return last;
    }

    // Convolutions followed by batchnorm carry no bias.
    int conv(const std::string& name, int cin, int cout, int k, int stride, int in_ref) {
        LayerNode<float> n;
        n.kind = LayerKind::Conv2d;
        n.name = name;
        n.in0 = in_ref;
        n.stride = stride;
        n.pad = k / 2;
        n.params.push_back(he_init({cout, cin, k, k}, static_cast<std::int64_t>(cin) * k * k, rng));
        return add(std::move(n));
    }

    int bn(const std::string& name, int channels, int in_ref) {
        LayerNode<float> n;
        n.kind = LayerKind::BatchNorm;
        n.name = name;
        n.in0 = in_ref;
        Tensor<float> gamma({channels});
        gamma.fill(1.0f);
        n.params.push_back(std::move(gamma));
        n.params.emplace_back(Shape{channels});  // beta = 0
        n.buffers.emplace_back(Shape{channels}); // running mean = 0
        Tensor<float> rv({channels});
        rv.fill(1.0f);
        n.buffers.push_back(std::move(rv));      // running var = 1
        return add(std::move(n));
    }

    int relu(const std::string& name, int in_ref) {
        LayerNode<float> n;
        n.kind = LayerKind::Relu;
        n.name = name;
        n.in0 = in_ref;
        return add(std::move(n));
    }

    int simple(LayerKind kind, const std::string& name, int in_ref) {
        LayerNode<float> n;
        n.kind = kind;
        n.name = name;
        n.in0 = in_ref;
        return add(std::move(n));
    }
};

} // namespace

Model build_model(const ArchitectureSpec& spec, std::uint64_t seed) {
    spec.validate();
    Model model;
    model.arch = spec;
    model.meta.seed = seed;
    Graph<float>& g = model.graph;
    g.in_channels = spec.in_channels;

    Rng rng(mix_seed(seed, 0x6d6f64656cull));
    Builder b{g, rng};

    int cur = b.conv("stem.conv", spec.in_channels, spec.stem.channels, spec.stem.kernel, spec.stem.stride, -1);
    cur = b.bn("stem.bn", spec.stem.channels, cur);
    cur = b.relu("stem.relu", cur);
    if (spec.stem.maxpool) cur = b.simple(LayerKind::MaxPool2x2, "stem.pool", cur);

    int channels = spec.stem.channels;
    for (std::size_t si = 0; si < spec.stages.size(); ++si) {
        const StageSpec& stage = spec.stages[si];
        for (int bi = 0; bi < stage.blocks; ++bi) {
            const std::string base = "stage" + std::to_string(si + 1) + ".block" + std::to_string(bi);
            const bool project = bi == 0 && (stage.downsample || channels != stage.channels);
            const int stride = bi == 0 && stage.downsample ? 2 : 1;
            const int block_in = cur;

            int main = b.conv(base + ".conv1", channels, stage.channels, 3, stride, block_in);
            main = b.bn(base + ".bn1", stage.channels, main);
            main = b.relu(base + ".relu1", main);
            main = b.conv(base + ".conv2", stage.channels, stage.channels, 3, 1, main);
            main = b.bn(base + ".bn2", stage.channels, main);

            int shortcut = block_in;
            if (project) {
                shortcut = b.conv(base + ".proj", channels, stage.channels, 1, stride, block_in);
                shortcut = b.bn(base + ".proj_bn", stage.channels, shortcut);
            }

            LayerNode<float> addn;
            addn.kind = LayerKind::ResidualAdd;
            addn.name = base + ".add";
            addn.in0 = main;
            addn.in1 = shortcut;
            cur = b.add(std::move(addn));
            cur = b.relu(base + ".relu2", cur);
            channels = stage.channels;
        }
    }

    cur = b.simple(LayerKind::GlobalAvgPool, "head.pool", cur);
    {
        LayerNode<float> drop;
        drop.kind = LayerKind::Dropout;
        drop.name = "head.dropout";
        drop.in0 = cur;
        drop.rate = spec.dropout_rate;
        cur = b.add(std::move(drop));
    }
    {
        LayerNode<float> dense;
        dense.kind = LayerKind::Dense;
        dense.name = "head.dense";
        dense.in0 = cur;
        dense.params.push_back(he_init({spec.num_classes, channels}, channels, rng));
        dense.params.emplace_back(Shape{spec.num_classes});
        cur = b.add(std::move(dense));
    }
    g.output = cur;
    return model;
}

Tensor<float> model_forward(Model& model, const Tensor<float>& batch, Phase phase, std::uint64_t dropout_seed) {
    if (batch.dim(2) != model.arch.input_size || batch.dim(3) != model.arch.input_size)
        throw ConfigError("model expects " + std::to_string(model.arch.input_size) + "x" +
                          std::to_string(model.arch.input_size) + " inputs, got " + shape_str(batch.shape()));
    ForwardOpts opts;
    opts.phase = phase;
    opts.dropout_seed = dropout_seed;
    Tape<float> tape;
    return graph_forward(model.graph, batch, opts, tape);
}

Tensor<float> model_forward_mc(Model& model, const Tensor<float>& batch, double rate, std::uint64_t dropout_seed) {
    ForwardOpts opts;
    opts.phase = Phase::Eval;
    opts.force_dropout = true;
    opts.force_rate = rate;
    opts.dropout_seed = dropout_seed;
    Tape<float> tape;
    return graph_forward(model.graph, batch, opts, tape);
}

ParamReport param_report(const Model& model) {
    ParamReport report;
    for (const LayerNode<float>& n : model.graph.nodes) {
        std::int64_t p = 0, buf = 0;
        for (const Tensor<float>& t : n.params) p += t.numel();
        for (const Tensor<float>& t : n.buffers) buf += t.numel();
        if (p == 0 && buf == 0) continue;
        report.rows.push_back({n.name, layer_kind_name(n.kind), p, buf});
        report.param_count += p;
        report.buffer_count += buf;
    }
    report.estimated_bytes = (report.param_count + report.buffer_count) * 4;
    return report;
}

} // namespace dspec
