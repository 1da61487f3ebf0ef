#pragma once

#include <functional>
#include <string>

#include "dspec/artifact.hpp"
#include "dspec/manifest.hpp"
#include "dspec/runconfig.hpp"

namespace dspec {

struct EpochLog {
    int epoch;
    double loss;
    double accuracy;
    double lr;
    double seconds;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains one plan's network on the records of `manifest` whose mode the
/// plan serves. Deterministic in (cfg, plan_index): data order, crops,
/// initialization and dropout all derive from the config seed.
ModelArtifact train_plan(const RunConfig& cfg, const NetPlan& plan, int plan_index,
                         const DatasetManifest& manifest, const std::string& manifest_dir,
                         const EpochCallback& on_epoch = {});

} // namespace dspec
