#include "dspec/artifact.hpp"

#include <cstdio>
#include <cstring>

#include <json.hpp>

#include "dspec/errors.hpp"

namespace dspec {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'D', 'S', 'P', 'E', 'C', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

struct Section {
    std::string name;
    std::string payload;
};

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

std::string arch_to_json_text(const ArchitectureSpec& spec) {
    json j;
    j["preset"] = spec.preset;
    j["in_channels"] = spec.in_channels;
    j["stem"] = {{"kernel", spec.stem.kernel},
                 {"channels", spec.stem.channels},
                 {"stride", spec.stem.stride},
                 {"maxpool", spec.stem.maxpool}};
    j["stages"] = json::array();
    for (const StageSpec& s : spec.stages)
        j["stages"].push_back({{"blocks", s.blocks}, {"channels", s.channels}, {"downsample", s.downsample}});
    j["num_classes"] = spec.num_classes;
    j["input_size"] = spec.input_size;
    j["dropout_rate"] = spec.dropout_rate;
    return j.dump();
}

ArchitectureSpec arch_from_json_text(const std::string& text) {
    json j = json::parse(text);
    ArchitectureSpec spec;
    spec.preset = j.at("preset").get<std::string>();
    spec.in_channels = j.at("in_channels").get<int>();
    spec.stem.kernel = j.at("stem").at("kernel").get<int>();
    spec.stem.channels = j.at("stem").at("channels").get<int>();
    spec.stem.stride = j.at("stem").at("stride").get<int>();
    spec.stem.maxpool = j.at("stem").at("maxpool").get<bool>();
    spec.stages.clear();
    for (const auto& s : j.at("stages"))
        spec.stages.push_back({s.at("blocks").get<int>(), s.at("channels").get<int>(), s.at("downsample").get<bool>()});
    spec.num_classes = j.at("num_classes").get<int>();
    spec.input_size = j.at("input_size").get<int>();
    spec.dropout_rate = j.at("dropout_rate").get<double>();
    return spec;
}

std::string pipeline_to_json_text(const PipelineConfig& p) {
    json j;
    j["sigma"] = p.sigma;
    j["rescale_size"] = p.rescale_size;
    j["crop_size"] = p.crop_size;
    j["image_mean"] = p.image_mean;
    j["heatmap_mean"] = p.heatmap_mean;
    j["use_heatmap"] = p.use_heatmap;
    return j.dump();
}

PipelineConfig pipeline_from_json_text(const std::string& text) {
    json j = json::parse(text);
    PipelineConfig p;
    p.sigma = j.at("sigma").get<double>();
    p.rescale_size = j.at("rescale_size").get<int>();
    p.crop_size = j.at("crop_size").get<int>();
    p.image_mean = j.at("image_mean").get<double>();
    p.heatmap_mean = j.at("heatmap_mean").get<double>();
    p.use_heatmap = j.at("use_heatmap").get<bool>();
    return p;
}

std::string quant_to_json_text(const QuantileTable& t) {
    json j;
    j["source"] = score_source_name(t.source);
    j["grid"] = t.grid;
    j["class_names"] = t.class_names;
    j["class_scores"] = t.class_scores;
    j["empty_classes"] = t.empty_classes;
    return j.dump();
}

QuantileTable quant_from_json_text(const std::string& text) {
    json j = json::parse(text);
    QuantileTable t;
    t.source = score_source_from_name(j.at("source").get<std::string>());
    t.grid = j.at("grid").get<std::vector<double>>();
    t.class_names = j.at("class_names").get<std::vector<std::string>>();
    t.class_scores = j.at("class_scores").get<std::vector<std::vector<double>>>();
    t.empty_classes = j.at("empty_classes").get<std::vector<int>>();
    return t;
}

std::string params_payload(const Model& model) {
    std::string out;
    for (const LayerNode<float>& node : model.graph.nodes) {
        for (const Tensor<float>& p : node.params)
            out.append(reinterpret_cast<const char*>(p.data()), static_cast<std::size_t>(p.numel()) * 4);
        for (const Tensor<float>& b : node.buffers)
            out.append(reinterpret_cast<const char*>(b.data()), static_cast<std::size_t>(b.numel()) * 4);
    }
    return out;
}

void load_params(Model& model, const std::string& payload) {
    std::size_t off = 0;
    for (LayerNode<float>& node : model.graph.nodes) {
        for (Tensor<float>& p : node.params) {
            const std::size_t bytes = static_cast<std::size_t>(p.numel()) * 4;
            if (off + bytes > payload.size()) throw IoError("params section shorter than the architecture requires");
            std::memcpy(p.data(), payload.data() + off, bytes);
            off += bytes;
        }
        for (Tensor<float>& b : node.buffers) {
            const std::size_t bytes = static_cast<std::size_t>(b.numel()) * 4;
            if (off + bytes > payload.size()) throw IoError("params section shorter than the architecture requires");
            std::memcpy(b.data(), payload.data() + off, bytes);
            off += bytes;
        }
    }
    if (off != payload.size())
        throw IoError("params section has " + std::to_string(payload.size() - off) + " trailing bytes");
}

std::string meta_to_json_text(const TrainMeta& meta) {
    json j;
    j["seed"] = meta.seed;
    j["epochs"] = meta.epochs;
    j["image_mean"] = meta.norm.image_mean;
    j["heatmap_mean"] = meta.norm.heatmap_mean;
    j["config_hash"] = meta.config_hash;
    return j.dump();
}

TrainMeta meta_from_json_text(const std::string& text) {
    json j = json::parse(text);
    TrainMeta meta;
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.epochs = j.at("epochs").get<int>();
    meta.norm.image_mean = j.at("image_mean").get<double>();
    meta.norm.heatmap_mean = j.at("heatmap_mean").get<double>();
    meta.config_hash = j.at("config_hash").get<std::string>();
    return meta;
}

} // namespace

std::uint32_t crc32(const void* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xffffffffu;
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

void save_artifact(const ModelArtifact& artifact, const std::string& path) {
    std::vector<Section> sections;
    sections.push_back({"arch", arch_to_json_text(artifact.model.arch)});
    sections.push_back({"params", params_payload(artifact.model)});
    sections.push_back({"pipeline", pipeline_to_json_text(artifact.pipeline)});
    sections.push_back({"plan", net_plan_to_json_text(artifact.plan)});
    sections.push_back({"variant", artifact.variant});
    sections.push_back({"meta", meta_to_json_text(artifact.model.meta)});
    if (artifact.quantiles) sections.push_back({"quant", quant_to_json_text(*artifact.quantiles)});

    std::string out;
    out.append(kMagic, sizeof kMagic);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(sections.size()));
    for (const Section& s : sections) {
        put_u32(out, static_cast<std::uint32_t>(s.name.size()));
        out.append(s.name);
        put_u64(out, s.payload.size());
        put_u32(out, crc32(s.payload.data(), s.payload.size()));
        out.append(s.payload);
    }

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write artifact '" + path + "'");
    const std::size_t written = std::fwrite(out.data(), 1, out.size(), f);
    std::fclose(f);
    if (written != out.size()) throw IoError("short write on artifact '" + path + "'");
}

ModelArtifact load_artifact(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open artifact '" + path + "'");
    std::string data;
    char buf[1 << 16];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) data.append(buf, got);
    std::fclose(f);

    std::size_t off = 0;
    auto need = [&](std::size_t n, const char* what) {
        if (off + n > data.size()) throw IoError("artifact '" + path + "' truncated in " + what);
    };
    need(sizeof kMagic, "magic");
    if (std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        throw IoError("artifact '" + path + "' has wrong magic bytes");
    off += sizeof kMagic;
    need(8, "header");
    std::uint32_t version, n_sections;
    std::memcpy(&version, data.data() + off, 4);
    std::memcpy(&n_sections, data.data() + off + 4, 4);
    off += 8;
    if (version != kVersion)
        throw IoError("artifact '" + path + "' has format version " + std::to_string(version) +
                      "; this build reads version " + std::to_string(kVersion));

    std::map<std::string, std::string> sections;
    for (std::uint32_t i = 0; i < n_sections; ++i) {
        need(4, "section header");
        std::uint32_t name_len;
        std::memcpy(&name_len, data.data() + off, 4);
        off += 4;
        need(name_len, "section name");
        std::string name = data.substr(off, name_len);
        off += name_len;
        need(12, "section header");
        std::uint64_t payload_len;
        std::uint32_t expect_crc;
        std::memcpy(&payload_len, data.data() + off, 8);
        std::memcpy(&expect_crc, data.data() + off + 8, 4);
        off += 12;
        need(payload_len, ("section '" + name + "'").c_str());
        std::string payload = data.substr(off, payload_len);
        off += payload_len;
        if (crc32(payload.data(), payload.size()) != expect_crc)
            throw IoError("artifact '" + path + "' checksum failure in section '" + name + "'");
        sections[name] = std::move(payload);
    }

    auto require = [&](const char* name) -> const std::string& {
        auto it = sections.find(name);
        if (it == sections.end())
            throw IoError("artifact '" + path + "' is missing section '" + std::string(name) + "'");
        return it->second;
    };

    ModelArtifact artifact;
    try {
        const ArchitectureSpec arch = arch_from_json_text(require("arch"));
        artifact.model = build_model(arch, 0);
        load_params(artifact.model, require("params"));
        artifact.pipeline = pipeline_from_json_text(require("pipeline"));
        artifact.plan = net_plan_from_json_text(require("plan"));
        artifact.variant = require("variant");
        artifact.model.meta = meta_from_json_text(require("meta"));
        if (sections.count("quant")) artifact.quantiles = quant_from_json_text(sections["quant"]);
    } catch (const json::exception& e) {
        throw IoError("artifact '" + path + "' has a malformed section: " + e.what());
    }
    return artifact;
}

} // namespace dspec
