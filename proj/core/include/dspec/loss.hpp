#pragma once

#include <cmath>
#include <vector>

#include "dspec/errors.hpp"
#include "dspec/tensor.hpp"

namespace dspec {

/// Softmax restricted to an index subset of a logit vector, with
/// max-subtraction. Returns one probability per subset entry.
template <typename T>
std::vector<T> softmax_subset(const T* logits, const std::vector<int>& subset) {
    if (subset.empty()) throw ConfigError("softmax over an empty index subset");
    T mx = logits[subset[0]];
    for (int i : subset) mx = std::max(mx, logits[i]);
    std::vector<T> out(subset.size());
    T sum = T(0);
    for (std::size_t j = 0; j < subset.size(); ++j) {
        out[j] = std::exp(logits[subset[j]] - mx);
        sum += out[j];
    }
    for (T& v : out) v /= sum;
    return out;
}

/// Cross-entropy over a subset of logits. Loss is -log softmax at `target`
/// (a global index that must be in the subset). The gradient has the full
/// logit length and is exactly zero outside the subset.
template <typename T>
T cross_entropy_subset(const T* logits, int logit_len, const std::vector<int>& subset,
                       int target, T* grad /* may be null; length logit_len */) {
    if (subset.empty()) throw ConfigError("cross entropy over an empty index subset");
    bool found = false;
    for (int i : subset)
        if (i == target) found = true;
    if (!found) throw UsageError("cross entropy target index " + std::to_string(target) +
                                 " is outside the logit subset");

    T mx = logits[subset[0]];
    for (int i : subset) mx = std::max(mx, logits[i]);
    T sum = T(0);
    for (int i : subset) sum += std::exp(logits[i] - mx);
    const T log_sum = std::log(sum);
    const T loss = -(logits[target] - mx - log_sum);
    if (grad) {
        for (int i = 0; i < logit_len; ++i) grad[i] = T(0);
        for (int i : subset) {
            const T p = std::exp(logits[i] - mx) / sum;
            grad[i] = i == target ? p - T(1) : p;
        }
    }
    return loss;
}

} // namespace dspec
