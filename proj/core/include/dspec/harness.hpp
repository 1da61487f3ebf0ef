#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dspec/evaluate.hpp"
#include "dspec/runconfig.hpp"
#include "dspec/train.hpp"

namespace dspec {

struct GeneratedData {
    DatasetManifest train, val, test, unknown, extra;
};

/// Renders all splits into cfg.data_dir. The test split comes from the
/// site-shifted config; unknown/extra come from the unshifted one.
GeneratedData generate_run(const RunConfig& cfg);

/// Trains every plan of the configured output variant; returns the written
/// artifact paths (model_dir/model_<plan>.dsm).
std::vector<std::string> train_run(const RunConfig& cfg, bool log_epochs = true);

std::vector<std::string> artifact_paths(const RunConfig& cfg);

/// Fits the quantile table on the TRAINING split (frozen model) and
/// rewrites each artifact with the table embedded.
void calibrate_run(const RunConfig& cfg);

/// Confusion-matrix evaluation of a split (post-mapping output classes);
/// writes confusion/metrics CSVs and the SVG into report_dir.
EvalReport eval_run(const RunConfig& cfg, const std::string& split = "test");

/// Ignored/error sweep over {train, test, unknown, extra} at every grid
/// point; writes sweep.csv and sweep.svg.
std::vector<SweepRecord> sweep_run(const RunConfig& cfg);

/// One line of machine-readable JSON per record: output class or IGNORED,
/// head, score, and the PV-under-CW hazard flag.
void predict_run(const std::string& artifact_path, const std::string& manifest_path, double q,
                 std::ostream& out);

/// Gradient oracle over every layer kind plus the full desk model; returns
/// the max relative error seen (report printed to `out`).
double gradcheck_run(std::uint64_t seed, std::ostream& out);

} // namespace dspec
