#include "dspec/manifest.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "dspec/errors.hpp"

namespace dspec {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write manifest '" + path + "'");
    std::fprintf(f, "# config_hash=%s\n", m.config_hash.c_str());
    std::fprintf(f, "# seed=%" PRIu64 "\n", m.seed);
    std::fprintf(f, "path,roi_row,roi_col,baseline,mode,label,split\n");
    for (const ManifestRecord& r : m.records) {
        std::fprintf(f, "%s,%s,%s,%s,%s,%s,%s\n", r.path.c_str(), fmt_double(r.roi_row).c_str(),
                     fmt_double(r.roi_col).c_str(), fmt_double(r.baseline).c_str(), mode_name(r.mode),
                     r.label.c_str(), r.split.c_str());
    }
    std::fclose(f);
}

DatasetManifest read_manifest(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open manifest '" + path + "'");
    std::string text;
    char buf[1 << 16];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
    std::fclose(f);

    DatasetManifest m;
    std::size_t pos = 0;
    bool header_seen = false;
    int line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::size_t eq = line.find('=');
            if (eq != std::string::npos) {
                const std::string key = line.substr(2, eq - 2);
                const std::string value = line.substr(eq + 1);
                if (key == "config_hash") m.config_hash = value;
                if (key == "seed") m.seed = std::strtoull(value.c_str(), nullptr, 10);
            }
            continue;
        }
        if (!header_seen) {
            if (line != "path,roi_row,roi_col,baseline,mode,label,split")
                throw DataError("manifest '" + path + "' line " + std::to_string(line_no) +
                                ": unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        const std::vector<std::string> f7 = split_csv(line);
        if (f7.size() != 7)
            throw DataError("manifest '" + path + "' line " + std::to_string(line_no) + ": expected 7 fields, got " +
                            std::to_string(f7.size()));
        ManifestRecord r;
        r.path = f7[0];
        r.roi_row = std::strtod(f7[1].c_str(), nullptr);
        r.roi_col = std::strtod(f7[2].c_str(), nullptr);
        r.baseline = std::strtod(f7[3].c_str(), nullptr);
        r.mode = mode_from_name(f7[4]);
        r.label = f7[5];
        r.split = f7[6];
        m.records.push_back(std::move(r));
    }
    if (!header_seen) throw DataError("manifest '" + path + "' has no header line");
    return m;
}

void write_image(const Tensor<float>& image, const std::string& path) {
    if (image.rank() != 2) throw UsageError("write_image expects a rank-2 tensor");
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write image '" + path + "'");
    const std::uint32_t h = static_cast<std::uint32_t>(image.dim(0));
    const std::uint32_t w = static_cast<std::uint32_t>(image.dim(1));
    // in-memory layout is little-endian on every supported target
    std::fwrite(&h, 4, 1, f);
    std::fwrite(&w, 4, 1, f);
    const std::size_t n = static_cast<std::size_t>(image.numel());
    if (std::fwrite(image.data(), 4, n, f) != n) {
        std::fclose(f);
        throw IoError("short write on image '" + path + "'");
    }
    std::fclose(f);
}

Tensor<float> read_image(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open image '" + path + "'");
    std::uint32_t h = 0, w = 0;
    if (std::fread(&h, 4, 1, f) != 1 || std::fread(&w, 4, 1, f) != 1) {
        std::fclose(f);
        throw IoError("image '" + path + "' truncated header");
    }
    if (h == 0 || w == 0 || static_cast<std::uint64_t>(h) * w > (1u << 28)) {
        std::fclose(f);
        throw IoError("image '" + path + "' has implausible dims " + std::to_string(h) + "x" + std::to_string(w));
    }
    Tensor<float> img = Tensor<float>::uninit({static_cast<int>(h), static_cast<int>(w)});
    const std::size_t n = static_cast<std::size_t>(img.numel());
    if (std::fread(img.data(), 4, n, f) != n) {
        std::fclose(f);
        throw IoError("image '" + path + "' truncated data");
    }
    std::fclose(f);
    return img;
}

std::string manifest_dir_of(const std::string& manifest_path) {
    const std::filesystem::path p(manifest_path);
    return p.has_parent_path() ? p.parent_path().string() : std::string(".");
}

Recording load_recording(const ManifestRecord& rec, const std::string& manifest_dir) {
    Recording out;
    out.image = read_image((std::filesystem::path(manifest_dir) / rec.path).string());
    out.roi_row = rec.roi_row;
    out.roi_col = rec.roi_col;
    out.baseline = rec.baseline;
    out.mode = rec.mode;
    out.label = rec.label;
    out.split = rec.split;
    try {
        out.validate();
    } catch (const DataError& e) {
        throw DataError("record '" + rec.path + "': " + e.what());
    }
    return out;
}

} // namespace dspec
