#include "dspec/infer.hpp"

#include "dspec/errors.hpp"

namespace dspec {

Tensor<float> encode_for_eval(const Recording& rec, const PipelineConfig& pipe) {
    EncodedInput enc = assemble_input(rec, pipe);
    return crop(enc, pipe.crop_size, CropMode::Center);
}

std::vector<InferredSample> infer_manifest(Model& model, const NetPlan& plan,
                                           const DatasetManifest& manifest,
                                           const std::string& manifest_dir,
                                           const PipelineConfig& pipe, int batch_size) {
    std::vector<InferredSample> out(manifest.records.size());
    const int k = model.arch.num_classes;
    const int c = model.arch.in_channels;
    const int s = pipe.crop_size;

    for (std::size_t base = 0; base < manifest.records.size(); base += static_cast<std::size_t>(batch_size)) {
        const int n = static_cast<int>(std::min<std::size_t>(batch_size, manifest.records.size() - base));
        Tensor<float> batch = Tensor<float>::uninit({n, c, s, s});
        for (int i = 0; i < n; ++i) {
            const ManifestRecord& rec = manifest.records[base + static_cast<std::size_t>(i)];
            const Recording r = load_recording(rec, manifest_dir);
            Tensor<float> one = encode_for_eval(r, pipe);
            if (one.dim(0) != c)
                throw ConfigError("encoded input has " + std::to_string(one.dim(0)) +
                                  " channels but the model expects " + std::to_string(c));
            std::copy(one.data(), one.data() + one.numel(),
                      batch.data() + static_cast<std::int64_t>(i) * one.numel());
        }
        Tensor<float> logits = model_forward(model, batch, Phase::Eval);
        for (int i = 0; i < n; ++i) {
            InferredSample& sample = out[base + static_cast<std::size_t>(i)];
            sample.record = manifest.records[base + static_cast<std::size_t>(i)];
            sample.presoftmax.assign(logits.data() + static_cast<std::int64_t>(i) * k,
                                     logits.data() + static_cast<std::int64_t>(i + 1) * k);
            sample.pred = plan.eval_predict(sample.presoftmax.data(), sample.record.mode);
            sample.bucket = bucket_baseline(sample.record.baseline);
            sample.mapped = map_output(plan.layout.class_names[static_cast<std::size_t>(sample.pred.network_class)],
                                       sample.record.mode, sample.bucket, plan.table);
        }
    }
    return out;
}

} // namespace dspec
