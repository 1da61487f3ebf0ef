#pragma once

#include <string>
#include <vector>

#include "dspec/pipeline.hpp"

namespace dspec {

/// One line of a dataset manifest. `path` is relative to the manifest file.
struct ManifestRecord {
    std::string path;
    double roi_row = 0.0;
    double roi_col = 0.0;
    double baseline = 0.5;
    Mode mode = Mode::CW;
    std::string label;
    std::string split;

    bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
    std::string config_hash;
    std::uint64_t seed = 0;

    bool operator==(const DatasetManifest&) const = default;
};

/// CSV with a fixed header plus `# key=value` metadata lines. Floats are
/// printed with round-trip precision so parse(write(m)) == m.
void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

/// Raw image container: u32 height, u32 width, then height*width
/// little-endian 32-bit floats.
void write_image(const Tensor<float>& image, const std::string& path);
Tensor<float> read_image(const std::string& path);

/// Record + image file -> validated Recording.
Recording load_recording(const ManifestRecord& rec, const std::string& manifest_dir);

std::string manifest_dir_of(const std::string& manifest_path);

} // namespace dspec
