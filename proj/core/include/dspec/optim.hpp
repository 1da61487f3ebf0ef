#pragma once

#include "dspec/errors.hpp"
#include "dspec/graph.hpp"

namespace dspec {

/// SGD with momentum and decoupled-from-nothing classic weight decay:
///   v <- momentum*v + grad + weight_decay*param
///   param <- param - lr*v
template <typename T>
struct SgdState {
    std::vector<std::vector<Tensor<T>>> velocity;  // aligned with graph params

    void init(const Graph<T>& g) {
        velocity.clear();
        velocity.resize(g.nodes.size());
        for (std::size_t i = 0; i < g.nodes.size(); ++i)
            for (const Tensor<T>& p : g.nodes[i].params)
                velocity[i].emplace_back(p.shape());
    }
};

template <typename T>
void sgd_step(Graph<T>& g, const GradientSet<T>& grads, SgdState<T>& state,
              double lr, double momentum, double weight_decay) {
    if (lr <= 0.0) throw ConfigError("sgd learning rate must be positive, got " + std::to_string(lr));
    if (state.velocity.empty()) state.init(g);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (grads.params[i].empty()) continue;
        for (std::size_t j = 0; j < g.nodes[i].params.size(); ++j) {
            Tensor<T>& p = g.nodes[i].params[j];
            const Tensor<T>& grad = grads.params[i][j];
            Tensor<T>& v = state.velocity[i][j];
            const T m = static_cast<T>(momentum);
            const T wd = static_cast<T>(weight_decay);
            const T step = static_cast<T>(lr);
            for (std::int64_t k = 0; k < p.numel(); ++k) {
                v[k] = m * v[k] + grad[k] + wd * p[k];
                p[k] -= step * v[k];
            }
        }
    }
}

extern template struct SgdState<float>;
extern template void sgd_step(Graph<float>&, const GradientSet<float>&, SgdState<float>&, double, double, double);

} // namespace dspec
