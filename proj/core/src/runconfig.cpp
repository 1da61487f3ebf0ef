#include "dspec/runconfig.hpp"

#include <cstdio>

#include <json.hpp>

#include "dspec/errors.hpp"

namespace dspec {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open config '" + path + "'");
    std::string text;
    char buf[1 << 16];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
    std::fclose(f);
    return text;
}

std::string text_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : text) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace

std::vector<double> ConfidenceConfig::grid() const {
    if (grid_step <= 0.0 || grid_max < grid_step)
        throw ConfigError("confidence grid needs positive step <= max");
    std::vector<double> g;
    const int steps = static_cast<int>(std::llround(grid_max / grid_step));
    for (int i = 0; i <= steps; ++i) g.push_back(static_cast<double>(i) * grid_step);
    return g;
}

std::uint64_t RunConfig::require_seed() const {
    if (!seed.has_value())
        throw ConfigError("no seed: set \"seed\" in the config or pass --seed (runs never draw entropy)");
    return *seed;
}

RunConfig run_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    RunConfig cfg;
    cfg.phantom = desk_phantom();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.data_dir = j.value("data_dir", cfg.data_dir);
    cfg.model_dir = j.value("model_dir", cfg.model_dir);
    cfg.report_dir = j.value("report_dir", cfg.report_dir);
    cfg.heads_config = j.value("heads_config", cfg.heads_config);
    cfg.output_variant = j.value("output_variant", cfg.output_variant);
    if (j.contains("arch")) {
        cfg.arch_preset = j["arch"].value("preset", cfg.arch_preset);
        cfg.dropout_rate = j["arch"].value("dropout_rate", cfg.dropout_rate);
    }
    if (j.contains("phantom")) {
        if (j["phantom"].value("preset", "") == "paper") cfg.phantom = paper_phantom();
        cfg.phantom = [&] {
            PhantomConfig base = cfg.phantom;
            json merged = json::parse(phantom_to_json_text(base));
            for (const auto& [k, v] : j["phantom"].items())
                if (k != "preset") merged[k] = v;
            return phantom_from_json_text(merged.dump());
        }();
    }
    if (j.contains("test_shift")) {
        cfg.test_shift.gain_factor = j["test_shift"].value("gain_factor", 1.0);
        cfg.test_shift.pose_factor = j["test_shift"].value("pose_factor", 1.0);
        cfg.test_shift.jitter_factor = j["test_shift"].value("jitter_factor", 1.0);
    }
    if (j.contains("pipeline")) {
        const json& p = j["pipeline"];
        cfg.pipeline.sigma = p.value("sigma", cfg.pipeline.sigma);
        cfg.pipeline.rescale_size = p.value("rescale_size", cfg.pipeline.rescale_size);
        cfg.pipeline.crop_size = p.value("crop_size", cfg.pipeline.crop_size);
        cfg.pipeline.image_mean = p.value("image_mean", cfg.pipeline.image_mean);
        cfg.pipeline.heatmap_mean = p.value("heatmap_mean", cfg.pipeline.heatmap_mean);
        cfg.pipeline.use_heatmap = p.value("use_heatmap", cfg.pipeline.use_heatmap);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.retrain_on_val = t.value("retrain_on_val", cfg.train.retrain_on_val);
        cfg.train.recompute_means = t.value("recompute_means", cfg.train.recompute_means);
    }
    if (j.contains("optimizer")) {
        const json& o = j["optimizer"];
        cfg.optimizer.lr = o.value("lr", cfg.optimizer.lr);
        cfg.optimizer.momentum = o.value("momentum", cfg.optimizer.momentum);
        cfg.optimizer.weight_decay = o.value("weight_decay", cfg.optimizer.weight_decay);
        if (o.contains("decay_epochs")) cfg.optimizer.decay_epochs = o["decay_epochs"].get<std::vector<int>>();
        cfg.optimizer.decay_factor = o.value("decay_factor", cfg.optimizer.decay_factor);
    }
    if (j.contains("confidence")) {
        const json& c = j["confidence"];
        cfg.confidence.grid_max = c.value("grid_max", cfg.confidence.grid_max);
        cfg.confidence.grid_step = c.value("grid_step", cfg.confidence.grid_step);
        cfg.confidence.source = c.value("source", cfg.confidence.source);
        cfg.confidence.mc_rate = c.value("mc_rate", cfg.confidence.mc_rate);
        cfg.confidence.mc_runs = c.value("mc_runs", cfg.confidence.mc_runs);
    }
    cfg.config_hash = text_hash(text);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json_text(read_file(path));
}

} // namespace dspec
