#include "smokesplat/camera.hpp"
#include "smokesplat/dehaze.hpp"
#include "smokesplat/eval.hpp"
#include "smokesplat/rng.hpp"
#include "smokesplat/splat/rasterizer.hpp"
#include "smokesplat/splat/scene.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace smokesplat;

namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> d(static_cast<std::size_t>(w) * h * 3);
    for (double& v : d) v = rng.uniform();
    return Image(w, h, std::move(d));
}

splat::GaussianScene blob_scene(int n, std::uint64_t seed) {
    Rng rng(seed);
    splat::GaussianScene s;
    for (int i = 0; i < n; ++i) {
        splat::Gaussian g;
        g.position = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (int k = 0; k < 3; ++k) g.log_scale[k] = std::log(rng.uniform(0.03, 0.15));
        g.rotation = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.opacity_logit = splat::logit(rng.uniform(0.2, 0.9));
        for (int k = 0; k < 3; ++k) g.color[k] = rng.uniform();
        s.gaussians.push_back(g);
    }
    return s;
}

CameraView camera(int size) {
    return CameraView::look_at({0, -4, 1.5}, {0, 0, 0}, {0, 0, 1}, 1.1 * size, size, size);
}

void BM_Render(benchmark::State& state) {
    const auto scene = blob_scene(static_cast<int>(state.range(0)), 1);
    const auto cam = camera(64);
    for (auto _ : state) benchmark::DoNotOptimize(splat::render(scene, cam));
}
BENCHMARK(BM_Render)->Arg(200)->Arg(1000);

void BM_Backward(benchmark::State& state) {
    const auto scene = blob_scene(static_cast<int>(state.range(0)), 2);
    const auto cam = camera(64);
    const Image target = noise_image(64, 64, 3);
    for (auto _ : state) benchmark::DoNotOptimize(splat::backward(scene, cam, target, 0.2));
}
BENCHMARK(BM_Backward)->Arg(200)->Arg(1000);

void BM_Dehaze(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const Image img = noise_image(size, size, 4);
    for (auto _ : state) benchmark::DoNotOptimize(dehaze::dehaze(img, {}));
}
BENCHMARK(BM_Dehaze)->Arg(64)->Arg(256);

void BM_Ssim(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const Image a = noise_image(size, size, 5), b = noise_image(size, size, 6);
    for (auto _ : state) benchmark::DoNotOptimize(eval::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

}  // namespace
BENCHMARK_MAIN();
