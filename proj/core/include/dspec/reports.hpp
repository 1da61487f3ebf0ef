#pragma once

#include <string>
#include <vector>

#include "dspec/confidence.hpp"
#include "dspec/evaluate.hpp"

namespace dspec {

/// Confusion CSV: structural-zero cells are written EMPTY (the "no number
/// shown" convention); real zeros are written as 0. Parsing restores both.
void write_confusion_csv(const EvalReport& report, const std::string& path);
EvalReport parse_confusion_csv(const std::string& path);

/// Row-normalized percentages, same empty-cell convention.
void write_confusion_norm_csv(const EvalReport& report, const std::string& path);

void write_metrics_csv(const EvalReport& report, const std::string& path);

void write_confusion_svg(const EvalReport& report, const std::string& path);

void write_sweep_csv(const std::vector<SweepRecord>& records, const std::string& path);
std::vector<SweepRecord> parse_sweep_csv(const std::string& path);

void write_sweep_svg(const std::vector<SweepRecord>& records, const std::string& path);

} // namespace dspec
