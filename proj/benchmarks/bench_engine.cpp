#include <benchmark/benchmark.h>

#include "dspec/layers.hpp"
#include "dspec/model.hpp"
#include "dspec/optim.hpp"
#include "dspec/loss.hpp"
#include "dspec/rng.hpp"
#include "dspec/pipeline.hpp"

using namespace dspec;

namespace {

void fill(Tensor<float>& t, Rng& rng) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
}

void BM_Conv2dForward(benchmark::State& state) {
    const int C = static_cast<int>(state.range(0));
    const int S = static_cast<int>(state.range(1));
    Rng rng(1);
    Tensor<float> x({8, C, S, S});
    fill(x, rng);
    Tensor<float> k({C, C, 3, 3});
    fill(k, rng);
    Tensor<float> y({8, C, S, S});
    for (auto _ : state) {
        conv2d_forward<float>(x, k, nullptr, 1, 1, y);
        benchmark::DoNotOptimize(y.data());
    }
    const double macs = 8.0 * C * C * 9.0 * S * S;
    state.counters["GFLOP/s"] = benchmark::Counter(2.0 * macs * state.iterations() / 1e9,
                                                   benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Conv2dForward)->Args({16, 56})->Args({32, 28})->Args({64, 14});

void BM_Conv2dBackward(benchmark::State& state) {
    const int C = static_cast<int>(state.range(0));
    const int S = static_cast<int>(state.range(1));
    Rng rng(1);
    Tensor<float> x({8, C, S, S});
    fill(x, rng);
    Tensor<float> k({C, C, 3, 3});
    fill(k, rng);
    Tensor<float> gy({8, C, S, S});
    fill(gy, rng);
    Tensor<float> gx({8, C, S, S});
    Tensor<float> gk({C, C, 3, 3});
    for (auto _ : state) {
        conv2d_backward_input(gy, k, 1, 1, gx);
        conv2d_backward_params<float>(x, gy, 1, 1, gk, nullptr);
        benchmark::DoNotOptimize(gx.data());
    }
    const double macs = 2.0 * 8.0 * C * C * 9.0 * S * S;
    state.counters["GFLOP/s"] = benchmark::Counter(2.0 * macs * state.iterations() / 1e9,
                                                   benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Conv2dBackward)->Args({16, 56})->Args({32, 28})->Args({64, 14});

void BM_DeskTrainStep(benchmark::State& state) {
    Model m = build_model(desk_arch(), 42);
    Rng rng(2);
    Tensor<float> x({32, 2, 56, 56});
    fill(x, rng);
    std::vector<int> subset(10);
    for (int i = 0; i < 10; ++i) subset[static_cast<std::size_t>(i)] = i;
    SgdState<float> sgd;
    std::uint64_t step = 0;
    for (auto _ : state) {
        Tape<float> tape;
        ForwardOpts opts;
        opts.phase = Phase::Train;
        opts.dropout_seed = step++;
        const Tensor<float>& out = graph_forward(m.graph, x, opts, tape);
        Tensor<float> dout(out.shape());
        for (int n = 0; n < 32; ++n) {
            std::vector<float> gl(10);
            cross_entropy_subset(out.data() + n * 10, 10, subset, n % 10, gl.data());
            for (int i = 0; i < 10; ++i) dout[n * 10 + i] = gl[static_cast<std::size_t>(i)] / 32.0f;
        }
        auto grads = graph_backward(m.graph, tape, dout);
        sgd_step(m.graph, grads, sgd, 0.05, 0.9, 1e-4);
    }
    state.counters["samples/s"] =
        benchmark::Counter(32.0 * state.iterations(), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_DeskTrainStep)->Unit(benchmark::kMillisecond);

void BM_DeskEvalForward(benchmark::State& state) {
    Model m = build_model(desk_arch(), 42);
    Rng rng(2);
    Tensor<float> x({1, 2, 56, 56});
    fill(x, rng);
    for (auto _ : state) {
        Tensor<float> out = model_forward(m, x, Phase::Eval);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_DeskEvalForward)->Unit(benchmark::kMillisecond);

void BM_RenderHeatmap(benchmark::State& state) {
    const int h = static_cast<int>(state.range(0));
    const int w = h / 2;
    for (auto _ : state) {
        Tensor<float> heat = render_heatmap(h / 2.0, w / 2.0, h, w, h / 42.0);
        benchmark::DoNotOptimize(heat.data());
    }
}
BENCHMARK(BM_RenderHeatmap)->Arg(128)->Arg(512);

void BM_AssembleInput(benchmark::State& state) {
    Recording rec;
    rec.image = Tensor<float>({128, 64});
    Rng rng(3);
    for (std::int64_t i = 0; i < rec.image.numel(); ++i)
        rec.image[i] = static_cast<float>(rng.uniform(0.0, 1.0));
    rec.roi_row = 60;
    rec.roi_col = 30;
    PipelineConfig cfg;
    cfg.sigma = 3.0;
    cfg.rescale_size = 64;
    cfg.crop_size = 56;
    for (auto _ : state) {
        EncodedInput enc = assemble_input(rec, cfg);
        Tensor<float> cropped = crop(enc, 56, CropMode::Center);
        benchmark::DoNotOptimize(cropped.data());
    }
}
BENCHMARK(BM_AssembleInput);

} // namespace

BENCHMARK_MAIN();
