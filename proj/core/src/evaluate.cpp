#include "dspec/evaluate.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "dspec/errors.hpp"
#include "dspec/infer.hpp"

namespace dspec {

namespace {

/// output class -> names of eval heads able to produce it
std::map<std::string, std::set<std::string>> producing_heads(const ModelArtifact& artifact) {
    std::map<std::string, std::set<std::string>> out;
    const NetPlan& plan = artifact.plan;
    for (const Head& head : plan.eval_layout.heads) {
        for (int c : head.classes) {
            const std::string& cls = plan.eval_layout.class_names[static_cast<std::size_t>(c)];
            for (Mode m : head.modes)
                for (BaselineBucket b :
                     {BaselineBucket::Negative, BaselineBucket::Zero, BaselineBucket::Positive}) {
                    out[map_output(cls, m, b, plan.table).output_class].insert(head.name);
                }
        }
    }
    return out;
}

} // namespace

EvalReport evaluate_artifacts(std::vector<ModelArtifact>& artifacts, const DatasetManifest& manifest,
                              const std::string& manifest_dir) {
    if (artifacts.empty()) throw UsageError("evaluate called with no artifacts");

    EvalReport report;
    // union universe in first-artifact order, then any extras
    std::set<std::string> seen;
    for (const ModelArtifact& a : artifacts)
        for (const std::string& cls : a.plan.table.universe)
            if (seen.insert(cls).second) report.classes.push_back(cls);
    std::map<std::string, int> class_index;
    for (std::size_t i = 0; i < report.classes.size(); ++i)
        class_index[report.classes[i]] = static_cast<int>(i);

    const std::size_t k = report.classes.size();
    report.counts.assign(k, std::vector<std::int64_t>(k, 0));

    // structural zeros from head reachability, merged across artifacts
    std::map<std::string, std::set<std::string>> heads_of;
    for (const ModelArtifact& a : artifacts)
        for (const auto& [cls, heads] : producing_heads(a))
            heads_of[cls].insert(heads.begin(), heads.end());
    report.structural.assign(k, std::vector<bool>(k, false));
    for (std::size_t t = 0; t < k; ++t)
        for (std::size_t p = 0; p < k; ++p) {
            const auto& ht = heads_of[report.classes[t]];
            const auto& hp = heads_of[report.classes[p]];
            bool intersect = false;
            for (const std::string& h : ht)
                if (hp.count(h)) intersect = true;
            report.structural[t][p] = !intersect && t != p;
        }

    // route records to the artifact serving their mode
    for (std::size_t ai = 0; ai < artifacts.size(); ++ai) {
        ModelArtifact& artifact = artifacts[ai];
        DatasetManifest sub;
        sub.seed = manifest.seed;
        sub.config_hash = manifest.config_hash;
        for (const ManifestRecord& r : manifest.records) {
            if (std::find(artifact.plan.modes.begin(), artifact.plan.modes.end(), r.mode) ==
                artifact.plan.modes.end())
                continue;
            sub.records.push_back(r);
        }
        if (sub.records.empty()) continue;
        std::vector<InferredSample> inferred =
            infer_manifest(artifact.model, artifact.plan, sub, manifest_dir, artifact.pipeline);
        for (const InferredSample& s : inferred) {
            const auto ti = class_index.find(s.record.label);
            if (ti == class_index.end())
                throw DataError("record '" + s.record.path + "' label '" + s.record.label +
                                "' is outside the output universe");
            const auto pi = class_index.find(s.mapped.output_class);
            ++report.counts[static_cast<std::size_t>(ti->second)][static_cast<std::size_t>(pi->second)];
            if (s.mapped.hazard) ++report.hazard_count;
            ++report.total;
        }
    }

    report.row_totals.assign(k, 0);
    std::int64_t diag = 0;
    for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t p = 0; p < k; ++p) report.row_totals[t] += report.counts[t][p];
        diag += report.counts[t][t];
    }
    report.overall_accuracy = report.total > 0 ? static_cast<double>(diag) / static_cast<double>(report.total) : 0.0;
    report.per_class_accuracy.assign(k, 0.0);
    for (std::size_t t = 0; t < k; ++t)
        if (report.row_totals[t] > 0)
            report.per_class_accuracy[t] =
                static_cast<double>(report.counts[t][t]) / static_cast<double>(report.row_totals[t]);
    return report;
}

} // namespace dspec
