#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dspec/heads.hpp"
#include "dspec/manifest.hpp"
#include "dspec/model.hpp"

namespace dspec {

enum class ScoreSource {
    Presoftmax,
    Softmax,
    McMeanPresoftmax,
    McVarPresoftmax,
    McMeanSoftmax,
    McVarSoftmax,
};

ScoreSource score_source_from_name(const std::string& name);
const char* score_source_name(ScoreSource s);

/// Variance sources flag uncertainty with HIGH values, so their cutoffs
/// come from the descending order and decide() ignores above the cutoff.
bool score_source_flipped(ScoreSource s);

struct McParams {
    double rate = 0.5;
    int runs = 100;
    std::uint64_t seed = 0;
};

/// Per-class mean and (population, two-pass) variance of the pre-softmax
/// and head-restricted softmax values over repeated forced-dropout runs.
struct McStats {
    std::vector<double> mean_presoftmax, var_presoftmax;
    std::vector<double> mean_softmax, var_softmax;
};

McStats mc_dropout_infer(Model& model, const Tensor<float>& input, const HeadLayout& layout,
                         double rate, int runs, std::uint64_t seed);

/// One sample pushed through the frozen model: deterministic prediction
/// plus the confidence score for the chosen source.
struct ScoredSample {
    int predicted = 0;           // class index in the plan's layout
    std::string head;
    double score = 0.0;          // source value at the predicted class
    std::string output_class;    // post-mapping
    bool hazard = false;
    std::string label;           // "" / UNKNOWN / EXTRA for unlabeled sets
    std::vector<float> presoftmax;
};

/// Records one entry per manifest record against the frozen model
/// (eval phase, center crop). Prediction always comes from the
/// deterministic forward; the source only changes the recorded score.
std::vector<ScoredSample> record_scores(Model& model, const NetPlan& plan,
                                        const DatasetManifest& manifest,
                                        const std::string& manifest_dir,
                                        const PipelineConfig& pipe,
                                        ScoreSource source = ScoreSource::Presoftmax,
                                        const McParams& mc = {});

std::vector<double> default_grid();  // 0 to 0.10 in 0.005 steps

/// Per-class sorted score lists with cutoff(q) = sorted[floor(q*N)] for
/// q > 0 and an always-accept sentinel at q = 0.
struct QuantileTable {
    ScoreSource source = ScoreSource::Presoftmax;
    std::vector<double> grid;
    std::vector<std::vector<double>> class_scores;  // sorted; descending when flipped
    std::vector<std::string> class_names;
    std::vector<int> empty_classes;  // fitted with zero records: always accept

    double cutoff(int cls, int grid_index) const;
    int grid_index(double q) const;  // exact grid membership or ConfigError
};

QuantileTable fit_quantiles(const std::vector<ScoredSample>& records,
                            const std::vector<double>& grid,
                            const HeadLayout& layout, ScoreSource source);

enum class Decision { Accepted, Ignored };

/// Ignored iff the predicted class's score falls strictly below its cutoff
/// (strictly above, for flipped sources).
Decision decide(double score, int predicted, double q, const QuantileTable& table);

struct SweepRecord {
    std::string dataset;
    double q = 0.0;
    double ignored_rate = 0.0;
    std::optional<double> error_rate;  // absent for unlabeled sets

    bool operator==(const SweepRecord&) const = default;
};

/// For each dataset and grid point: ignored/total, and for labeled sets
/// (misclassified AND accepted)/total. Both rates share the denominator.
std::vector<SweepRecord> sweep(const std::map<std::string, std::vector<ScoredSample>>& datasets,
                               const QuantileTable& table);

} // namespace dspec
