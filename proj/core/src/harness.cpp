#include "dspec/harness.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>

#include "dspec/confidence.hpp"
#include "dspec/gradcheck.hpp"
#include "dspec/infer.hpp"
#include "dspec/loss.hpp"
#include "dspec/reports.hpp"

namespace dspec {

namespace fs = std::filesystem;

GeneratedData generate_run(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.require_seed();
    cfg.phantom.validate();
    fs::create_directories(cfg.data_dir);
    GeneratedData out;
    out.train = generate_dataset(cfg.phantom, mix_seed(seed, 1), "train", cfg.data_dir);
    out.val = generate_dataset(cfg.phantom, mix_seed(seed, 2), "val", cfg.data_dir);
    const PhantomConfig test_cfg = site_shift(cfg.phantom, cfg.test_shift);
    out.test = generate_dataset(test_cfg, mix_seed(seed, 3), "test", cfg.data_dir);
    SpecialSets special = generate_special_sets(cfg.phantom, mix_seed(seed, 4), cfg.data_dir);
    out.unknown = std::move(special.unknown);
    out.extra = std::move(special.extra);
    return out;
}

namespace {

DatasetManifest training_manifest(const RunConfig& cfg) {
    DatasetManifest train = read_manifest((fs::path(cfg.data_dir) / "train.csv").string());
    if (cfg.train.retrain_on_val) {
        const DatasetManifest val = read_manifest((fs::path(cfg.data_dir) / "val.csv").string());
        train.records.insert(train.records.end(), val.records.begin(), val.records.end());
    }
    return train;
}

std::vector<NetPlan> plans_of(const RunConfig& cfg) {
    const HeadsConfig heads = load_heads_config(cfg.heads_config);
    const std::vector<std::string> violations = validate_table(heads.table, heads.layout);
    if (!violations.empty()) {
        std::string msg = "heads config '" + cfg.heads_config + "' failed validation:";
        for (const std::string& v : violations) msg += "\n  " + v;
        throw ConfigError(msg);
    }
    return configure_output(variant_from_name(cfg.output_variant), heads.layout, heads.table);
}

} // namespace

std::vector<std::string> artifact_paths(const RunConfig& cfg) {
    std::vector<std::string> paths;
    for (const NetPlan& plan : plans_of(cfg))
        paths.push_back((fs::path(cfg.model_dir) / ("model_" + plan.name + ".dsm")).string());
    return paths;
}

std::vector<std::string> train_run(const RunConfig& cfg, bool log_epochs) {
    const DatasetManifest train = training_manifest(cfg);
    const std::string dir = cfg.data_dir;
    fs::create_directories(cfg.model_dir);
    std::vector<std::string> paths;
    const std::vector<NetPlan> plans = plans_of(cfg);
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const NetPlan& plan = plans[i];
        EpochCallback cb;
        if (log_epochs)
            cb = [&](const EpochLog& log) {
                std::printf("[train %s] epoch %d loss %.4f acc %.4f lr %.4g (%.1fs)\n", plan.name.c_str(),
                            log.epoch, log.loss, log.accuracy, log.lr, log.seconds);
                std::fflush(stdout);
            };
        ModelArtifact artifact = train_plan(cfg, plan, static_cast<int>(i), train, dir, cb);
        const std::string path = (fs::path(cfg.model_dir) / ("model_" + plan.name + ".dsm")).string();
        save_artifact(artifact, path);
        paths.push_back(path);
    }
    return paths;
}

void calibrate_run(const RunConfig& cfg) {
    const DatasetManifest train = training_manifest(cfg);
    const ScoreSource source = score_source_from_name(cfg.confidence.source);
    const McParams mc{cfg.confidence.mc_rate, cfg.confidence.mc_runs, cfg.require_seed()};
    for (const std::string& path : artifact_paths(cfg)) {
        ModelArtifact artifact = load_artifact(path);
        DatasetManifest sub;
        sub.seed = train.seed;
        sub.config_hash = train.config_hash;
        for (const ManifestRecord& r : train.records)
            if (std::find(artifact.plan.modes.begin(), artifact.plan.modes.end(), r.mode) !=
                artifact.plan.modes.end())
                sub.records.push_back(r);
        const std::vector<ScoredSample> scores =
            record_scores(artifact.model, artifact.plan, sub, cfg.data_dir, artifact.pipeline, source, mc);
        artifact.quantiles = fit_quantiles(scores, cfg.confidence.grid(), artifact.plan.layout, source);
        save_artifact(artifact, path);
    }
}

EvalReport eval_run(const RunConfig& cfg, const std::string& split) {
    const DatasetManifest manifest = read_manifest((fs::path(cfg.data_dir) / (split + ".csv")).string());
    std::vector<ModelArtifact> artifacts;
    for (const std::string& path : artifact_paths(cfg)) artifacts.push_back(load_artifact(path));
    EvalReport report = evaluate_artifacts(artifacts, manifest, cfg.data_dir);
    fs::create_directories(cfg.report_dir);
    write_confusion_csv(report, (fs::path(cfg.report_dir) / ("confusion_" + split + ".csv")).string());
    write_confusion_norm_csv(report, (fs::path(cfg.report_dir) / ("confusion_" + split + "_norm.csv")).string());
    write_metrics_csv(report, (fs::path(cfg.report_dir) / ("metrics_" + split + ".csv")).string());
    write_confusion_svg(report, (fs::path(cfg.report_dir) / ("confusion_" + split + ".svg")).string());
    return report;
}

std::vector<SweepRecord> sweep_run(const RunConfig& cfg) {
    std::vector<ModelArtifact> artifacts;
    for (const std::string& path : artifact_paths(cfg)) {
        artifacts.push_back(load_artifact(path));
        if (!artifacts.back().quantiles)
            throw UsageError("artifact '" + path + "' has no quantile table; run `dspec calibrate` first");
    }
    const ScoreSource source = artifacts.front().quantiles->source;
    const McParams mc{cfg.confidence.mc_rate, cfg.confidence.mc_runs, cfg.seed.value_or(0)};

    std::map<std::string, std::vector<ScoredSample>> datasets;
    for (const char* split : {"train", "test", "unknown", "extra"}) {
        const fs::path path = fs::path(cfg.data_dir) / (std::string(split) + ".csv");
        if (!fs::exists(path)) continue;
        const DatasetManifest manifest = read_manifest(path.string());
        std::vector<ScoredSample> all;
        for (ModelArtifact& artifact : artifacts) {
            DatasetManifest sub;
            for (const ManifestRecord& r : manifest.records)
                if (std::find(artifact.plan.modes.begin(), artifact.plan.modes.end(), r.mode) !=
                    artifact.plan.modes.end())
                    sub.records.push_back(r);
            if (sub.records.empty()) continue;
            std::vector<ScoredSample> scores =
                record_scores(artifact.model, artifact.plan, sub, cfg.data_dir, artifact.pipeline, source, mc);
            all.insert(all.end(), scores.begin(), scores.end());
        }
        datasets[split] = std::move(all);
    }

    // one shared table keyed by class names is impossible across separate
    // nets; sweep each dataset against its artifact's table and merge
    std::vector<SweepRecord> merged;
    if (artifacts.size() == 1) {
        merged = sweep(datasets, *artifacts.front().quantiles);
    } else {
        // per-artifact decisions, aggregated per dataset and grid point
        const std::vector<double>& grid = artifacts.front().quantiles->grid;
        for (const auto& [name, _] : datasets) {
            (void)_;
            std::vector<std::int64_t> ignored(grid.size(), 0), wrong(grid.size(), 0);
            std::int64_t total = 0;
            bool labeled = true;
            for (ModelArtifact& artifact : artifacts) {
                const DatasetManifest manifest =
                    read_manifest((fs::path(cfg.data_dir) / (name + ".csv")).string());
                DatasetManifest sub;
                for (const ManifestRecord& r : manifest.records)
                    if (std::find(artifact.plan.modes.begin(), artifact.plan.modes.end(), r.mode) !=
                        artifact.plan.modes.end())
                        sub.records.push_back(r);
                if (sub.records.empty()) continue;
                const std::vector<ScoredSample> scores = record_scores(
                    artifact.model, artifact.plan, sub, cfg.data_dir, artifact.pipeline, source, mc);
                total += static_cast<std::int64_t>(scores.size());
                for (const ScoredSample& s : scores) {
                    if (s.label.empty() || s.label == "UNKNOWN" || s.label == "EXTRA") labeled = false;
                    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
                        if (decide(s.score, s.predicted, grid[gi], *artifact.quantiles) == Decision::Ignored)
                            ++ignored[gi];
                        else if (s.output_class != s.label)
                            ++wrong[gi];
                    }
                }
            }
            for (std::size_t gi = 0; gi < grid.size(); ++gi) {
                SweepRecord rec;
                rec.dataset = name;
                rec.q = grid[gi];
                rec.ignored_rate = total ? static_cast<double>(ignored[gi]) / static_cast<double>(total) : 0.0;
                if (labeled && total)
                    rec.error_rate = static_cast<double>(wrong[gi]) / static_cast<double>(total);
                merged.push_back(std::move(rec));
            }
        }
    }
    fs::create_directories(cfg.report_dir);
    write_sweep_csv(merged, (fs::path(cfg.report_dir) / "sweep.csv").string());
    write_sweep_svg(merged, (fs::path(cfg.report_dir) / "sweep.svg").string());
    return merged;
}

void predict_run(const std::string& artifact_path, const std::string& manifest_path, double q,
                 std::ostream& out) {
    ModelArtifact artifact = load_artifact(artifact_path);
    if (q > 0.0 && !artifact.quantiles)
        throw UsageError("quantile " + std::to_string(q) +
                         " requested but the artifact has no quantile table; run `dspec calibrate` first");
    const DatasetManifest manifest = read_manifest(manifest_path);
    const std::string dir = manifest_dir_of(manifest_path);
    const std::vector<InferredSample> inferred =
        infer_manifest(artifact.model, artifact.plan, manifest, dir, artifact.pipeline);
    char buf[512];
    for (std::size_t i = 0; i < inferred.size(); ++i) {
        const InferredSample& s = inferred[i];
        const double score = s.presoftmax[static_cast<std::size_t>(s.pred.network_class)];
        bool ignored = false;
        if (q > 0.0)
            ignored = decide(score, s.pred.network_class, q, *artifact.quantiles) == Decision::Ignored;
        std::snprintf(buf, sizeof buf,
                      "{\"index\":%zu,\"path\":\"%s\",\"decision\":\"%s\",\"output_class\":\"%s\","
                      "\"head\":\"%s\",\"score\":%.9g,\"hazard\":%s}",
                      i, s.record.path.c_str(), ignored ? "IGNORED" : "accepted",
                      ignored ? "" : s.mapped.output_class.c_str(), s.pred.head.c_str(), score,
                      s.mapped.hazard && !ignored ? "true" : "false");
        out << buf << "\n";
    }
}

double gradcheck_run(std::uint64_t seed, std::ostream& out) {
    double worst = 0.0;
    auto note = [&](const std::string& name, double err) {
        worst = std::max(worst, err);
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-24s max_rel_err %.3g %s", name.c_str(), err,
                      err < 1e-4 ? "ok" : "FAIL");
        out << buf << "\n";
    };

    LossFn loss = [](const Tensor<double>& o, Tensor<double>* grad) {
        const int n = static_cast<int>(o.numel());
        std::vector<int> subset;
        double total = 0.0;
        if (o.rank() == 2) {
            const int k = o.dim(1);
            for (int i = 0; i < k; ++i) subset.push_back(i);
            if (grad) grad->fill(0.0);
            for (int r = 0; r < o.dim(0); ++r) {
                std::vector<double> g(static_cast<std::size_t>(k));
                total += cross_entropy_subset(o.data() + static_cast<std::int64_t>(r) * k, k, subset,
                                              r % k, grad ? g.data() : nullptr);
                if (grad)
                    for (int i = 0; i < k; ++i)
                        (*grad)[static_cast<std::int64_t>(r) * k + i] = g[static_cast<std::size_t>(i)] / o.dim(0);
            }
            return total / o.dim(0);
        }
        // feature-map outputs: smooth squared norm
        for (int i = 0; i < n; ++i) total += o[i] * o[i];
        if (grad)
            for (int i = 0; i < n; ++i) (*grad)[i] = 2.0 * o[i];
        return total;
    };

    // per-kind single-layer graphs, randomized shapes
    struct KindCase {
        LayerKind kind;
        const char* name;
    };
    const KindCase kinds[] = {
        {LayerKind::Conv2d, "conv2d"},       {LayerKind::BatchNorm, "batchnorm"},
        {LayerKind::Relu, "relu"},           {LayerKind::MaxPool2x2, "maxpool2x2"},
        {LayerKind::GlobalAvgPool, "gap"},   {LayerKind::ResidualAdd, "residual_add"},
        {LayerKind::Dropout, "dropout"},     {LayerKind::Dense, "dense"},
    };
    for (const KindCase& kc : kinds) {
        double err = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(kc.kind), static_cast<std::uint64_t>(trial)));
            Graph<double> g;
            Tensor<double> input;
            if (kc.kind == LayerKind::Dense) {
                LayerNode<double> d;
                d.kind = LayerKind::Dense;
                d.name = "dense";
                d.in0 = -1;
                const int in_dim = static_cast<int>(rng.uniform_int(3, 9));
                const int out_dim = static_cast<int>(rng.uniform_int(2, 6));
                Tensor<double> w({out_dim, in_dim});
                for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-0.8, 0.8);
                d.params.push_back(std::move(w));
                d.params.emplace_back(Shape{out_dim});
                g.nodes.push_back(std::move(d));
                g.output = 0;
                g.in_channels = in_dim;
                input = Tensor<double>({static_cast<int>(rng.uniform_int(1, 4)), in_dim});
                for (std::int64_t i = 0; i < input.numel(); ++i) input[i] = rng.uniform(-1.0, 1.0);
            } else {
                const int c = 2;
                g.in_channels = c;
                const int h = static_cast<int>(rng.uniform_int(4, 8));
                const int w = static_cast<int>(rng.uniform_int(4, 8));
                LayerNode<double> node;
                node.kind = kc.kind;
                node.name = kc.name;
                node.in0 = -1;
                switch (kc.kind) {
                    case LayerKind::Conv2d: {
                        const int cout = static_cast<int>(rng.uniform_int(1, 3));
                        const int k = rng.bernoulli(0.5) ? 3 : 1;
                        node.stride = rng.bernoulli(0.3) ? 2 : 1;
                        node.pad = k / 2;
                        Tensor<double> kern({cout, c, k, k});
                        for (std::int64_t i = 0; i < kern.numel(); ++i) kern[i] = rng.uniform(-0.8, 0.8);
                        node.params.push_back(std::move(kern));
                        Tensor<double> bias({cout});
                        for (std::int64_t i = 0; i < bias.numel(); ++i) bias[i] = rng.uniform(-0.2, 0.2);
                        node.params.push_back(std::move(bias));
                        break;
                    }
                    case LayerKind::BatchNorm: {
                        Tensor<double> gamma({c});
                        for (std::int64_t i = 0; i < c; ++i) gamma[i] = rng.uniform(0.5, 1.5);
                        node.params.push_back(std::move(gamma));
                        node.params.emplace_back(Shape{c});
                        node.buffers.emplace_back(Shape{c});
                        Tensor<double> rv({c});
                        rv.fill(1.0);
                        node.buffers.push_back(std::move(rv));
                        break;
                    }
                    case LayerKind::Dropout:
                        node.rate = 0.4;
                        break;
                    default:
                        break;
                }
                if (kc.kind == LayerKind::ResidualAdd) {
                    LayerNode<double> relu;
                    relu.kind = LayerKind::Relu;
                    relu.name = "relu";
                    relu.in0 = -1;
                    g.nodes.push_back(std::move(relu));
                    node.in0 = 0;
                    node.in1 = -1;
                    g.nodes.push_back(std::move(node));
                    g.output = 1;
                } else {
                    g.nodes.push_back(std::move(node));
                    g.output = 0;
                }
                input = Tensor<double>({2, c, h, w});
                for (std::int64_t i = 0; i < input.numel(); ++i) input[i] = rng.uniform(-1.0, 1.0);
            }

            double margin = kink_margin(g, input);
            int guard = 0;
            while (margin < 1e-3 && guard++ < 100) {
                for (std::int64_t i = 0; i < input.numel(); ++i) input[i] = rng.uniform(-1.0, 1.0);
                margin = kink_margin(g, input);
            }
            GradCheckOptions opts;
            opts.samples_per_param = 5;
            err = std::max(err, grad_check(g, input, loss, opts).max_rel_err);
        }
        note(kc.name, err);
    }

    // full desk model on a small input, away from relu kinks
    {
        ArchitectureSpec spec = desk_arch();
        spec.input_size = 12;
        Model m = build_model(spec, seed);
        Graph<double> g = graph_to_double(m.graph);
        Tensor<double> input({1, 2, 12, 12});
        double margin = 0.0;
        for (std::uint64_t attempt = 0; attempt < 400; ++attempt) {
            Rng rng(mix_seed(seed, 0xdeull, attempt));
            for (std::int64_t i = 0; i < input.numel(); ++i) input[i] = rng.normal(0.0, 1.0);
            margin = kink_margin(g, input);
            if (margin > 1e-4) break;
        }
        GradCheckOptions opts;
        opts.samples_per_param = 2;
        opts.check_input_grad = false;
        note("full_desk_model", grad_check(g, input, loss, opts).max_rel_err);
    }
    return worst;
}

} // namespace dspec
