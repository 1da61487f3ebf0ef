#include "dspec/train.hpp"

#include <algorithm>
#include <chrono>

#include "dspec/errors.hpp"
#include "dspec/loss.hpp"
#include "dspec/optim.hpp"
#include "dspec/parallel.hpp"

namespace dspec {

namespace {

struct CachedSample {
    Tensor<float> channels;  // pre-crop encoded input (C,S,S)
    Mode mode;
    int target;  // network class in the plan's layout
};

double schedule_lr(const OptimizerConfig& opt, int epoch) {
    double lr = opt.lr;
    for (int de : opt.decay_epochs)
        if (epoch >= de) lr *= opt.decay_factor;
    return lr;
}

} // namespace

ModelArtifact train_plan(const RunConfig& cfg, const NetPlan& plan, int plan_index,
                         const DatasetManifest& manifest, const std::string& manifest_dir,
                         const EpochCallback& on_epoch) {
    const std::uint64_t seed = cfg.require_seed();
    PipelineConfig pipe = cfg.pipeline;
    pipe.validate();

    // encode once with zero means; the real means are folded in afterwards
    PipelineConfig encode_pipe = pipe;
    if (cfg.train.recompute_means) {
        encode_pipe.image_mean = 0.0;
        encode_pipe.heatmap_mean = 0.0;
    }

    std::vector<const ManifestRecord*> records;
    for (const ManifestRecord& r : manifest.records)
        if (std::find(plan.modes.begin(), plan.modes.end(), r.mode) != plan.modes.end())
            records.push_back(&r);
    if (records.empty())
        throw DataError("plan '" + plan.name + "' has no training records for its modes");

    std::vector<CachedSample> samples(records.size());
    parallel_for(static_cast<std::int64_t>(records.size()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            const ManifestRecord& rec = *records[static_cast<std::size_t>(i)];
            const Recording r = load_recording(rec, manifest_dir);
            CachedSample& s = samples[static_cast<std::size_t>(i)];
            try {
                s.target = network_class_for_label(rec.label, rec.mode, bucket_baseline(rec.baseline), plan);
            } catch (const DataError& err) {
                throw DataError("record '" + rec.path + "': " + err.what());
            }
            s.channels = assemble_input(r, encode_pipe).channels;
            s.mode = rec.mode;
        }
    });

    if (cfg.train.recompute_means) {
        const int s_len = pipe.rescale_size;
        const std::int64_t plane = static_cast<std::int64_t>(s_len) * s_len;
        double image_sum = 0.0, heat_sum = 0.0;
        for (const CachedSample& s : samples) {
            image_sum += detail::lane_sum(s.channels.data(), plane);
            if (pipe.use_heatmap) heat_sum += detail::lane_sum(s.channels.data() + plane, plane);
        }
        const double denom = static_cast<double>(plane) * static_cast<double>(samples.size());
        pipe.image_mean = image_sum / denom;
        pipe.heatmap_mean = pipe.use_heatmap ? heat_sum / denom : 0.0;
        for (CachedSample& s : samples) {
            for (std::int64_t i = 0; i < plane; ++i)
                s.channels[i] -= static_cast<float>(pipe.image_mean);
            if (pipe.use_heatmap)
                for (std::int64_t i = 0; i < plane; ++i)
                    s.channels[plane + i] -= static_cast<float>(pipe.heatmap_mean);
        }
    }

    ArchitectureSpec arch = cfg.arch_preset == "paper18"
                                ? paper18_arch(pipe.use_heatmap ? 2 : 1, plan.layout.num_classes())
                                : desk_arch(pipe.use_heatmap ? 2 : 1, plan.layout.num_classes());
    arch.dropout_rate = cfg.dropout_rate;
    arch.input_size = pipe.crop_size;
    Model model = build_model(arch, mix_seed(seed, 0x706c616eull, static_cast<std::uint64_t>(plan_index)));

    const int n = static_cast<int>(samples.size());
    const int batch = std::min(cfg.train.batch_size, n);
    const int crop_c = pipe.crop_size;
    const int channels = arch.in_channels;

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    SgdState<float> sgd;
    std::uint64_t step_counter = 0;
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        // Fisher-Yates with the pinned generator: platform-independent order
        Rng shuffle_rng(mix_seed(seed, 0x73687566ull, static_cast<std::uint64_t>(epoch) * 131 + plan_index));
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.uniform_int(0, i));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        const double lr = schedule_lr(cfg.optimizer, epoch);

        double loss_sum = 0.0;
        std::int64_t correct = 0;
        for (int base = 0; base < n; base += batch) {
            const int bsz = std::min(batch, n - base);
            Tensor<float> batch_x = Tensor<float>::uninit({bsz, channels, crop_c, crop_c});
            for (int i = 0; i < bsz; ++i) {
                const CachedSample& s = samples[static_cast<std::size_t>(order[static_cast<std::size_t>(base + i)])];
                EncodedInput view;
                view.channels = s.channels;  // copy; crop() reads a view-free layout
                view.mode = s.mode;
                Tensor<float> cropped =
                    crop(view, crop_c, CropMode::Random,
                         mix_seed(seed, static_cast<std::uint64_t>(epoch) * 1000003 + order[static_cast<std::size_t>(base + i)], 0x63ull));
                std::copy(cropped.data(), cropped.data() + cropped.numel(),
                          batch_x.data() + static_cast<std::int64_t>(i) * cropped.numel());
            }

            Tape<float> tape;
            ForwardOpts opts;
            opts.phase = Phase::Train;
            opts.dropout_seed = mix_seed(seed, 0x64726f70ull, step_counter);
            const Tensor<float>& out = graph_forward(model.graph, batch_x, opts, tape);
            Tensor<float> dout(out.shape());
            const int k = plan.layout.num_classes();
            for (int i = 0; i < bsz; ++i) {
                const CachedSample& s = samples[static_cast<std::size_t>(order[static_cast<std::size_t>(base + i)])];
                const MaskedLoss ml = masked_loss(out.data() + static_cast<std::int64_t>(i) * k, k,
                                                  s.target, s.mode, plan.layout);
                loss_sum += ml.loss;
                for (int c = 0; c < k; ++c)
                    dout[static_cast<std::int64_t>(i) * k + c] = ml.grad[static_cast<std::size_t>(c)] / static_cast<float>(bsz);
                const std::vector<int> subset = plan.train_subset(s.mode);
                if (argmax_subset(out.data() + static_cast<std::int64_t>(i) * k, subset) == s.target) ++correct;
            }
            GradientSet<float> grads = graph_backward(model.graph, tape, dout);
            sgd_step(model.graph, grads, sgd, lr, cfg.optimizer.momentum, cfg.optimizer.weight_decay);
            ++step_counter;
        }

        if (on_epoch) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            on_epoch({epoch, loss_sum / n, static_cast<double>(correct) / n, lr, secs});
        }
    }

    model.meta.seed = seed;
    model.meta.epochs = cfg.train.epochs;
    model.meta.norm.image_mean = pipe.image_mean;
    model.meta.norm.heatmap_mean = pipe.heatmap_mean;
    model.meta.config_hash = cfg.config_hash;

    ModelArtifact artifact;
    artifact.model = std::move(model);
    artifact.plan = plan;
    artifact.variant = cfg.output_variant;
    artifact.pipeline = pipe;
    return artifact;
}

} // namespace dspec
