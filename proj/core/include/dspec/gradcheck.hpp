#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dspec/graph.hpp"

namespace dspec {

/// Differentiable scalar objective over the graph output. grad must have the
/// output's shape.
using LossFn = std::function<double(const Tensor<double>& out, Tensor<double>* grad)>;

struct GradCheckOptions {
    double step = 1e-5;            // central-difference half-step
    int samples_per_param = 4;     // coordinates probed per parameter tensor
    std::uint64_t sample_seed = 7; // picks the probed coordinates
    bool check_input_grad = true;
};

struct GradCheckReport {
    struct Group {
        std::string node;
        int param_index;  // -1 for the input gradient
        double max_rel_err;
        int coords_checked;
    };
    std::vector<Group> groups;
    double max_rel_err = 0.0;
};

/// Compares analytic gradients against 64-bit central finite differences.
/// Runs the graph with batch statistics active but running-stat updates
/// frozen, so every probe evaluates the same function.
GradCheckReport grad_check(Graph<double>& g, const Tensor<double>& input, const LossFn& loss,
                           const GradCheckOptions& opts = {});

/// Smallest distance to a gradient discontinuity seen on a forward pass:
/// min |relu input| and min (max - runner-up) over maxpool windows.
/// Finite-difference probes are only trustworthy when this is well above
/// step * max-sensitivity; callers resample their inputs until it is.
double kink_margin(Graph<double>& g, const Tensor<double>& input);

} // namespace dspec
