#pragma once

#include <string>
#include <vector>

#include "dspec/artifact.hpp"
#include "dspec/manifest.hpp"

namespace dspec {

/// Confusion matrix over OUTPUT classes (post-mapping). Cells whose true
/// and predicted classes cannot share a head are structural zeros: no model
/// can populate them under head-restricted evaluation.
struct EvalReport {
    std::vector<std::string> classes;
    std::vector<std::vector<std::int64_t>> counts;  // [true][predicted]
    std::vector<std::vector<bool>> structural;
    double overall_accuracy = 0.0;
    std::vector<double> per_class_accuracy;  // NaN-free: 0 when the row is empty
    std::vector<std::int64_t> row_totals;
    std::int64_t hazard_count = 0;
    std::int64_t total = 0;
};

/// Routes each record to the artifact whose plan serves the record's mode
/// and aggregates a single confusion matrix over the union universe.
EvalReport evaluate_artifacts(std::vector<ModelArtifact>& artifacts, const DatasetManifest& manifest,
                              const std::string& manifest_dir);

} // namespace dspec
