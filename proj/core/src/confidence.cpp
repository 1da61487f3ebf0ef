#include "dspec/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "dspec/errors.hpp"
#include "dspec/infer.hpp"
#include "dspec/loss.hpp"

namespace dspec {

ScoreSource score_source_from_name(const std::string& name) {
    if (name == "presoftmax") return ScoreSource::Presoftmax;
    if (name == "softmax") return ScoreSource::Softmax;
    if (name == "mc_mean_presoftmax") return ScoreSource::McMeanPresoftmax;
    if (name == "mc_var_presoftmax") return ScoreSource::McVarPresoftmax;
    if (name == "mc_mean_softmax") return ScoreSource::McMeanSoftmax;
    if (name == "mc_var_softmax") return ScoreSource::McVarSoftmax;
    throw ConfigError("unknown score source '" + name + "'");
}

const char* score_source_name(ScoreSource s) {
    switch (s) {
        case ScoreSource::Presoftmax: return "presoftmax";
        case ScoreSource::Softmax: return "softmax";
        case ScoreSource::McMeanPresoftmax: return "mc_mean_presoftmax";
        case ScoreSource::McVarPresoftmax: return "mc_var_presoftmax";
        case ScoreSource::McMeanSoftmax: return "mc_mean_softmax";
        case ScoreSource::McVarSoftmax: return "mc_var_softmax";
    }
    return "?";
}

bool score_source_flipped(ScoreSource s) {
    return s == ScoreSource::McVarPresoftmax || s == ScoreSource::McVarSoftmax;
}

namespace {

/// Head-restricted softmax value for each class (its own head's classifier).
std::vector<double> head_softmax(const std::vector<float>& presoftmax, const HeadLayout& layout) {
    std::vector<double> out(presoftmax.size(), 0.0);
    for (const Head& head : layout.heads) {
        std::vector<float> probs = softmax_subset(presoftmax.data(), head.classes);
        for (std::size_t j = 0; j < head.classes.size(); ++j)
            out[static_cast<std::size_t>(head.classes[j])] = probs[j];
    }
    return out;
}

} // namespace

McStats mc_dropout_infer(Model& model, const Tensor<float>& input, const HeadLayout& layout,
                         double rate, int runs, std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("mc-dropout rate must be in [0,1), got " + std::to_string(rate));
    if (runs < 1) throw ConfigError("mc-dropout needs at least one run");
    const int k = model.arch.num_classes;
    std::vector<std::vector<double>> pre(static_cast<std::size_t>(runs));
    std::vector<std::vector<double>> soft(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        Tensor<float> out = model_forward_mc(model, input, rate, mix_seed(seed, 0x6d63, static_cast<std::uint64_t>(r)));
        std::vector<float> row(out.data(), out.data() + k);
        pre[static_cast<std::size_t>(r)].assign(row.begin(), row.end());
        std::vector<double> sm = head_softmax(row, layout);
        soft[static_cast<std::size_t>(r)] = std::move(sm);
    }
    auto stats = [&](const std::vector<std::vector<double>>& runs_data, std::vector<double>& mean,
                     std::vector<double>& var) {
        mean.assign(static_cast<std::size_t>(k), 0.0);
        var.assign(static_cast<std::size_t>(k), 0.0);
        for (const auto& row : runs_data)
            for (int c = 0; c < k; ++c) mean[static_cast<std::size_t>(c)] += row[static_cast<std::size_t>(c)];
        for (int c = 0; c < k; ++c) mean[static_cast<std::size_t>(c)] /= runs;
        // two-pass: identical runs give exactly zero variance
        for (const auto& row : runs_data)
            for (int c = 0; c < k; ++c) {
                const double d = row[static_cast<std::size_t>(c)] - mean[static_cast<std::size_t>(c)];
                var[static_cast<std::size_t>(c)] += d * d;
            }
        for (int c = 0; c < k; ++c) var[static_cast<std::size_t>(c)] /= runs;
    };
    McStats out;
    stats(pre, out.mean_presoftmax, out.var_presoftmax);
    stats(soft, out.mean_softmax, out.var_softmax);
    return out;
}

std::vector<ScoredSample> record_scores(Model& model, const NetPlan& plan,
                                        const DatasetManifest& manifest,
                                        const std::string& manifest_dir,
                                        const PipelineConfig& pipe, ScoreSource source,
                                        const McParams& mc) {
    const bool needs_mc = source == ScoreSource::McMeanPresoftmax || source == ScoreSource::McVarPresoftmax ||
                          source == ScoreSource::McMeanSoftmax || source == ScoreSource::McVarSoftmax;
    std::vector<InferredSample> inferred = infer_manifest(model, plan, manifest, manifest_dir, pipe);
    std::vector<ScoredSample> out;
    out.reserve(inferred.size());
    for (std::size_t i = 0; i < inferred.size(); ++i) {
        InferredSample& s = inferred[i];
        ScoredSample rec;
        rec.predicted = s.pred.network_class;
        rec.head = s.pred.head;
        rec.output_class = s.mapped.output_class;
        rec.hazard = s.mapped.hazard;
        rec.label = s.record.label;
        rec.presoftmax = s.presoftmax;
        switch (source) {
            case ScoreSource::Presoftmax:
                rec.score = s.presoftmax[static_cast<std::size_t>(rec.predicted)];
                break;
            case ScoreSource::Softmax: {
                std::vector<double> sm = head_softmax(s.presoftmax, plan.eval_layout);
                rec.score = sm[static_cast<std::size_t>(rec.predicted)];
                break;
            }
            default:
                break;
        }
        if (needs_mc) {
            const Recording r = load_recording(s.record, manifest_dir);
            Tensor<float> one = encode_for_eval(r, pipe);
            Tensor<float> batch = Tensor<float>::uninit({1, one.dim(0), one.dim(1), one.dim(2)});
            for (std::int64_t j = 0; j < one.numel(); ++j) batch[j] = one[j];
            McStats st = mc_dropout_infer(model, batch, plan.eval_layout, mc.rate, mc.runs,
                                          mix_seed(mc.seed, 0x7363, i));
            const std::size_t c = static_cast<std::size_t>(rec.predicted);
            switch (source) {
                case ScoreSource::McMeanPresoftmax: rec.score = st.mean_presoftmax[c]; break;
                case ScoreSource::McVarPresoftmax: rec.score = st.var_presoftmax[c]; break;
                case ScoreSource::McMeanSoftmax: rec.score = st.mean_softmax[c]; break;
                case ScoreSource::McVarSoftmax: rec.score = st.var_softmax[c]; break;
                default: break;
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<double> default_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) * 0.005);
    return grid;
}

double QuantileTable::cutoff(int cls, int grid_index) const {
    const bool flip = score_source_flipped(source);
    if (grid_index == 0) return flip ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
    const auto& scores = class_scores[static_cast<std::size_t>(cls)];
    if (scores.empty())
        return flip ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    const double q = grid[static_cast<std::size_t>(grid_index)];
    std::size_t idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(scores.size())));
    if (idx >= scores.size()) idx = scores.size() - 1;
    return scores[idx];
}

int QuantileTable::grid_index(double q) const {
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (std::fabs(grid[i] - q) < 1e-12) return static_cast<int>(i);
    // explicit failure, no silent snapping
    double best = grid.empty() ? 0.0 : grid[0];
    for (double g : grid)
        if (std::fabs(g - q) < std::fabs(best - q)) best = g;
    throw ConfigError("quantile " + std::to_string(q) + " is not on the grid; nearest grid point is " +
                      std::to_string(best));
}

QuantileTable fit_quantiles(const std::vector<ScoredSample>& records, const std::vector<double>& grid,
                            const HeadLayout& layout, ScoreSource source) {
    if (grid.empty() || grid[0] != 0.0)
        throw ConfigError("quantile grid must start at 0");
    QuantileTable table;
    table.source = source;
    table.grid = grid;
    table.class_names = layout.class_names;
    table.class_scores.assign(layout.class_names.size(), {});
    for (const ScoredSample& r : records)
        table.class_scores[static_cast<std::size_t>(r.predicted)].push_back(r.score);
    const bool flip = score_source_flipped(source);
    for (std::size_t c = 0; c < table.class_scores.size(); ++c) {
        auto& v = table.class_scores[c];
        if (v.empty()) {
            table.empty_classes.push_back(static_cast<int>(c));
            continue;
        }
        if (flip)
            std::sort(v.begin(), v.end(), std::greater<double>());
        else
            std::sort(v.begin(), v.end());
    }
    return table;
}

Decision decide(double score, int predicted, double q, const QuantileTable& table) {
    const int gi = table.grid_index(q);
    const double cut = table.cutoff(predicted, gi);
    if (score_source_flipped(table.source)) return score > cut ? Decision::Ignored : Decision::Accepted;
    return score < cut ? Decision::Ignored : Decision::Accepted;
}

std::vector<SweepRecord> sweep(const std::map<std::string, std::vector<ScoredSample>>& datasets,
                               const QuantileTable& table) {
    std::vector<SweepRecord> out;
    for (const auto& [name, records] : datasets) {
        const bool labeled = !records.empty() && !records.front().label.empty() &&
                             records.front().label != "UNKNOWN" && records.front().label != "EXTRA";
        for (std::size_t gi = 0; gi < table.grid.size(); ++gi) {
            const double q = table.grid[gi];
            std::int64_t ignored = 0, wrong_accepted = 0;
            for (const ScoredSample& r : records) {
                if (decide(r.score, r.predicted, q, table) == Decision::Ignored) {
                    ++ignored;
                } else if (labeled && r.output_class != r.label) {
                    ++wrong_accepted;
                }
            }
            SweepRecord rec;
            rec.dataset = name;
            rec.q = q;
            const double total = records.empty() ? 1.0 : static_cast<double>(records.size());
            rec.ignored_rate = static_cast<double>(ignored) / total;
            if (labeled) rec.error_rate = static_cast<double>(wrong_accepted) / total;
            out.push_back(std::move(rec));
        }
    }
    return out;
}

} // namespace dspec
