#pragma once

#include <optional>
#include <string>

#include "dspec/confidence.hpp"
#include "dspec/heads.hpp"
#include "dspec/model.hpp"

namespace dspec {

/// Self-contained trained model: prediction needs nothing but this file and
/// a recording. Serialized as a versioned binary container of length-
/// prefixed, CRC-checked sections (params as little-endian 32-bit floats).
struct ModelArtifact {
    Model model;
    NetPlan plan;
    std::string variant;  // output variant name
    PipelineConfig pipeline;
    std::optional<QuantileTable> quantiles;
};

void save_artifact(const ModelArtifact& artifact, const std::string& path);

/// Rejects unknown magic or version explicitly; a checksum mismatch names
/// the damaged section.
ModelArtifact load_artifact(const std::string& path);

std::uint32_t crc32(const void* data, std::size_t len);

} // namespace dspec
