#include "dspec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>

#include "dspec/errors.hpp"
#include "dspec/harness.hpp"
#include "dspec/infer.hpp"

namespace dspec {

namespace fs = std::filesystem;

namespace {

struct VariantSpec {
    std::string id;
    std::string info;
    OutputVariant output;
    bool heatmap;
};

VariantSpec variant_spec(const std::string& id) {
    if (id == "E1") return {"E1", "image", OutputVariant::SeparateNets, false};
    if (id == "E2") return {"E2", "image+heatmap", OutputVariant::SeparateNets, true};
    if (id == "E3") return {"E3", "image+heatmap", OutputVariant::SingleHead, true};
    if (id == "E4") return {"E4", "image+heatmap", OutputVariant::SingleTrainMultiheadTest, true};
    if (id == "E5") return {"E5", "image+heatmap", OutputVariant::Multihead, true};
    throw ConfigError("unknown experiment variant '" + id + "' (expected E1..E5)");
}

double median_infer_ms(ModelArtifact& artifact) {
    const int s = artifact.model.arch.input_size;
    Tensor<float> input({1, artifact.model.arch.in_channels, s, s});
    Rng rng(7);
    for (std::int64_t i = 0; i < input.numel(); ++i) input[i] = static_cast<float>(rng.uniform(0.0, 1.0));
    model_forward(artifact.model, input, Phase::Eval);  // warm up
    std::vector<double> times;
    for (int i = 0; i < 100; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        model_forward(artifact.model, input, Phase::Eval);
        times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + 50, times.end());
    return times[50];
}

} // namespace

std::vector<ExperimentRow> run_experiment(const RunConfig& base, const std::vector<std::string>& variants,
                                          bool log_epochs) {
    base.require_seed();
    generate_run(base);

    std::vector<ExperimentRow> rows;
    std::vector<std::string> e3_paths;  // E4 reuses E3's single-head training
    for (const std::string& id : variants) {
        const VariantSpec spec = variant_spec(id);
        RunConfig cfg = base;
        cfg.output_variant = variant_name(spec.output);
        cfg.pipeline.use_heatmap = spec.heatmap;
        cfg.model_dir = (fs::path(base.model_dir) / id).string();

        std::vector<std::string> paths;
        const bool reuse_e3 = spec.id == "E4" && !e3_paths.empty();
        if (reuse_e3) {
            // same training as E3 (bitwise: same seed and data); re-plan the
            // artifacts with the head-restricted eval layout
            fs::create_directories(cfg.model_dir);
            const HeadsConfig heads = load_heads_config(cfg.heads_config);
            const std::vector<NetPlan> plans =
                configure_output(OutputVariant::SingleTrainMultiheadTest, heads.layout, heads.table);
            for (const std::string& src : e3_paths) {
                ModelArtifact artifact = load_artifact(src);
                artifact.variant = cfg.output_variant;
                artifact.plan = plans.front();
                const std::string dst =
                    (fs::path(cfg.model_dir) / ("model_" + artifact.plan.name + ".dsm")).string();
                save_artifact(artifact, dst);
                paths.push_back(dst);
            }
        } else {
            paths = train_run(cfg, log_epochs);
        }
        if (spec.id == "E3") e3_paths = paths;

        std::vector<ModelArtifact> artifacts;
        for (const std::string& p : paths) artifacts.push_back(load_artifact(p));
        const DatasetManifest test = read_manifest((fs::path(cfg.data_dir) / "test.csv").string());
        const EvalReport report = evaluate_artifacts(artifacts, test, cfg.data_dir);

        ExperimentRow row;
        row.id = spec.id;
        row.info = spec.info;
        row.output = cfg.output_variant;
        row.accuracy = report.overall_accuracy;
        for (ModelArtifact& a : artifacts) {
            const ParamReport pr = param_report(a.model);
            row.params += pr.param_count;
            row.bytes += pr.estimated_bytes;
            row.median_infer_ms += median_infer_ms(a);  // summed like size: one net per mode family
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_experiment_csv(const std::vector<ExperimentRow>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write experiment table '" + path + "'");
    std::fprintf(f, "id,info,output,accuracy,params,bytes,median_infer_ms\n");
    for (const ExperimentRow& r : rows)
        std::fprintf(f, "%s,%s,%s,%.6f,%lld,%lld,%.3f\n", r.id.c_str(), r.info.c_str(), r.output.c_str(),
                     r.accuracy, static_cast<long long>(r.params), static_cast<long long>(r.bytes),
                     r.median_infer_ms);
    std::fclose(f);
}

std::vector<ExperimentRow> parse_experiment_csv(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open experiment table '" + path + "'");
    std::string text;
    char buf[1 << 14];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
    std::fclose(f);

    std::vector<ExperimentRow> rows;
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos) throw DataError("experiment table '" + path + "' has no header");
    ++pos;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        ExperimentRow r;
        char id[16], info[32], output[48];
        long long params = 0, bytes = 0;
        if (std::sscanf(line.c_str(), "%15[^,],%31[^,],%47[^,],%lf,%lld,%lld,%lf", id, info, output,
                        &r.accuracy, &params, &bytes, &r.median_infer_ms) != 7)
            throw DataError("experiment table '" + path + "' line malformed: " + line);
        r.id = id;
        r.info = info;
        r.output = output;
        r.params = params;
        r.bytes = bytes;
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace dspec
