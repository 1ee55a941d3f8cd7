#include <benchmark/benchmark.h>

#include "psgan/nn/spp.hpp"
#include "psgan/scene.hpp"
#include "psgan/toyscapes.hpp"
#include "psgan/trainer.hpp"

using namespace psgan;

namespace {

Tensorf random_image(std::vector<int> shape, Rng& rng) {
    Tensorf t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

TrainConfig toy_train_config(int base) {
    TrainConfig cfg;
    cfg.patch = 64;
    cfg.gen_levels = 6;
    cfg.base_channels = base;
    cfg.seed = 1;
    return cfg;
}

PatchPair toy_pair() {
    Rng rng(3);
    const Scene scene = gen_toy_scene(rng, {});
    Rng asm_rng(4);
    return assemble_dataset({scene}, 64, asm_rng).at(0);
}

}  // namespace

static void BM_GeneratorForward64(benchmark::State& state) {
    Rng rng(1);
    GeneratorConfig cfg;
    cfg.levels = 6;
    cfg.base_channels = static_cast<int>(state.range(0));
    nn::UNetGenerator<float> gen(cfg);
    gen.init(rng);
    const auto x = random_image({3, 64, 64}, rng);
    for (auto _ : state) {
        auto y = gen.forward(x, false);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_GeneratorForward64)->Arg(16)->Arg(32)->Arg(64);

static void BM_SppPool(benchmark::State& state) {
    Rng rng(2);
    const auto feat = random_image({512, static_cast<int>(state.range(0)),
                                    static_cast<int>(state.range(0))}, rng);
    for (auto _ : state) {
        auto v = spp_pool(feat);
        benchmark::DoNotOptimize(v.data());
    }
}
BENCHMARK(BM_SppPool)->Arg(2)->Arg(6);

static void BM_TrainStep64(benchmark::State& state) {
    auto st = init_train_state(toy_train_config(static_cast<int>(state.range(0))));
    const auto pair = toy_pair();
    for (auto _ : state) {
        auto m = train_step(st, pair);
        benchmark::DoNotOptimize(m.g_total);
    }
}
BENCHMARK(BM_TrainStep64)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_MaskWithNoise(benchmark::State& state) {
    Rng rng(5);
    const auto patch = random_image({3, 256, 256}, rng);
    BBox box;
    box.x = 60;
    box.y = 40;
    box.w = 80;
    box.h = 170;
    for (auto _ : state) {
        auto masked = mask_with_noise(patch, box, rng);
        benchmark::DoNotOptimize(masked.data());
    }
}
BENCHMARK(BM_MaskWithNoise);

BENCHMARK_MAIN();
