#include "dspec/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dspec/rng.hpp"

namespace dspec {

namespace {

ForwardOpts probe_opts() {
    ForwardOpts opts;
    opts.phase = Phase::Train;      // batch statistics, the differentiated path
    opts.update_bn_running = false; // keep repeated probes on the same function
    opts.check_finite = false;
    return opts;
}

double eval_loss(Graph<double>& g, const Tensor<double>& input, const LossFn& loss) {
    Tape<double> tape;
    const Tensor<double>& out = graph_forward(g, input, probe_opts(), tape);
    return loss(out, nullptr);
}

double rel_err(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-6});
    return std::fabs(a - b) / scale;
}

} // namespace

GradCheckReport grad_check(Graph<double>& g, const Tensor<double>& input, const LossFn& loss,
                           const GradCheckOptions& opts) {
    Tape<double> tape;
    const Tensor<double>& out = graph_forward(g, input, probe_opts(), tape);
    Tensor<double> dout(out.shape());
    loss(out, &dout);
    const GradientSet<double> analytic = graph_backward(g, tape, dout);

    GradCheckReport report;
    Rng rng(opts.sample_seed);

    auto probe = [&](double* value, double analytic_grad) {
        const double saved = *value;
        *value = saved + opts.step;
        const double lp = eval_loss(g, input, loss);
        *value = saved - opts.step;
        const double lm = eval_loss(g, input, loss);
        *value = saved;
        const double numeric = (lp - lm) / (2.0 * opts.step);
        return rel_err(analytic_grad, numeric);
    };

    for (std::size_t ni = 0; ni < g.nodes.size(); ++ni) {
        for (std::size_t pi = 0; pi < g.nodes[ni].params.size(); ++pi) {
            Tensor<double>& p = g.nodes[ni].params[pi];
            const Tensor<double>& ag = analytic.params[ni][pi];
            GradCheckReport::Group group{g.nodes[ni].name, static_cast<int>(pi), 0.0, 0};
            const int n_coords = static_cast<int>(std::min<std::int64_t>(opts.samples_per_param, p.numel()));
            for (int s = 0; s < n_coords; ++s) {
                const std::int64_t coord = rng.uniform_int(0, p.numel() - 1);
                group.max_rel_err = std::max(group.max_rel_err, probe(&p[coord], ag[coord]));
                ++group.coords_checked;
            }
            report.groups.push_back(group);
            report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
        }
    }

    if (opts.check_input_grad) {
        Tensor<double> in_copy = input;
        GradCheckReport::Group group{"input", -1, 0.0, 0};
        const int n_coords = static_cast<int>(std::min<std::int64_t>(opts.samples_per_param, in_copy.numel()));
        for (int s = 0; s < n_coords; ++s) {
            const std::int64_t coord = rng.uniform_int(0, in_copy.numel() - 1);
            const double saved = in_copy[coord];
            in_copy[coord] = saved + opts.step;
            const double lp = eval_loss(g, in_copy, loss);
            in_copy[coord] = saved - opts.step;
            const double lm = eval_loss(g, in_copy, loss);
            in_copy[coord] = saved;
            const double numeric = (lp - lm) / (2.0 * opts.step);
            group.max_rel_err = std::max(group.max_rel_err, rel_err(analytic.input[coord], numeric));
            ++group.coords_checked;
        }
        report.groups.push_back(group);
        report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    }

    return report;
}

double kink_margin(Graph<double>& g, const Tensor<double>& input) {
    Tape<double> tape;
    graph_forward(g, input, probe_opts(), tape);
    double margin = 1e300;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const LayerNode<double>& node = g.nodes[i];
        if (node.kind == LayerKind::Relu) {
            const Tensor<double>& x = node.in0 < 0 ? tape.input : tape.act[static_cast<std::size_t>(node.in0)];
            for (std::int64_t j = 0; j < x.numel(); ++j) margin = std::min(margin, std::fabs(x[j]));
        } else if (node.kind == LayerKind::MaxPool2x2) {
            const Tensor<double>& x = node.in0 < 0 ? tape.input : tape.act[static_cast<std::size_t>(node.in0)];
            const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    for (int oh = 0; oh + 1 < H; oh += 2)
                        for (int ow = 0; ow + 1 < W; ow += 2) {
                            double v[4] = {x.at(n, c, oh, ow), x.at(n, c, oh, ow + 1),
                                           x.at(n, c, oh + 1, ow), x.at(n, c, oh + 1, ow + 1)};
                            std::sort(v, v + 4);
                            margin = std::min(margin, v[3] - v[2]);
                        }
        }
    }
    return margin;
}

} // namespace dspec
