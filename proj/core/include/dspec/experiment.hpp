#pragma once

#include <string>
#include <vector>

#include "dspec/runconfig.hpp"

namespace dspec {

struct ExperimentRow {
    std::string id;       // E1..E5
    std::string info;     // image | image+heatmap
    std::string output;   // output variant
    double accuracy = 0.0;
    std::int64_t params = 0;
    std::int64_t bytes = 0;          // summed across nets for separate variants
    double median_infer_ms = 0.0;    // CPU, batch 1, median of 100 runs

    bool operator==(const ExperimentRow&) const = default;
};

/// Runs the requested ablation variants against one shared generated
/// dataset (same data seed for all rows):
///   E1 separate nets, image only    E2 separate nets, image+heatmap
///   E3 one head                     E4 train one head, test two heads
///   E5 two heads (masked loss)
/// E3 and E4 share one trained network (training is identical; only the
/// evaluation restriction differs).
std::vector<ExperimentRow> run_experiment(const RunConfig& cfg, const std::vector<std::string>& variants,
                                          bool log_epochs = false);

void write_experiment_csv(const std::vector<ExperimentRow>& rows, const std::string& path);
std::vector<ExperimentRow> parse_experiment_csv(const std::string& path);

} // namespace dspec
