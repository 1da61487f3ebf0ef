#pragma once

#include <optional>
#include <string>

#include "dspec/pipeline.hpp"
#include "dspec/synthgen.hpp"

namespace dspec {

struct OptimizerConfig {
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<int> decay_epochs;  // lr *= decay_factor entering these epochs
    double decay_factor = 0.1;
};

struct TrainOptions {
    int epochs = 8;
    int batch_size = 32;
    bool retrain_on_val = false;  // fold the validation split into training
    bool recompute_means = true;  // channel means from the training set
};

struct ConfidenceConfig {
    double grid_max = 0.10;
    double grid_step = 0.005;
    std::string source = "presoftmax";
    double mc_rate = 0.5;
    int mc_runs = 100;

    std::vector<double> grid() const;
};

/// Full run description, loaded from one JSON file. Paths are resolved
/// relative to the working directory.
struct RunConfig {
    std::optional<std::uint64_t> seed;  // mandatory before any run starts
    std::string data_dir = "data";
    std::string model_dir = "models";
    std::string report_dir = "reports";
    std::string heads_config = "configs/heads_default.json";
    std::string output_variant = "multihead";
    std::string arch_preset = "desk";
    double dropout_rate = 0.0;
    PhantomConfig phantom;
    ShiftParams test_shift;
    PipelineConfig pipeline;
    TrainOptions train;
    OptimizerConfig optimizer;
    ConfidenceConfig confidence;

    std::uint64_t require_seed() const;
    std::string config_hash;  // hash of the file contents, set by the loader
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text);

} // namespace dspec
