#pragma once

#include <string>
#include <vector>

#include "dspec/heads.hpp"
#include "dspec/manifest.hpp"
#include "dspec/model.hpp"

namespace dspec {

/// One manifest record pushed through encode -> center crop -> frozen
/// forward -> head-restricted argmax -> mapping.
struct InferredSample {
    ManifestRecord record;
    std::vector<float> presoftmax;
    Prediction pred;
    BaselineBucket bucket = BaselineBucket::Zero;
    MapResult mapped;
};

/// Batched deterministic inference over a manifest. Eval-phase batchnorm
/// uses running statistics, so results are independent of the batching.
std::vector<InferredSample> infer_manifest(Model& model, const NetPlan& plan,
                                           const DatasetManifest& manifest,
                                           const std::string& manifest_dir,
                                           const PipelineConfig& pipe,
                                           int batch_size = 64);

/// Encode + center-crop one recording with the model's stored channel means.
Tensor<float> encode_for_eval(const Recording& rec, const PipelineConfig& pipe);

} // namespace dspec
