#include <benchmark/benchmark.h>

#include <random>

#include "starpoly/cem.hpp"
#include "starpoly/encode.hpp"
#include "starpoly/image_io.hpp"
#include "starpoly/losses.hpp"
#include "starpoly/model.hpp"
#include "starpoly/ops.hpp"
#include "starpoly/optim.hpp"
#include "starpoly/postprocess.hpp"
#include "starpoly/synth.hpp"

using namespace starpoly;

namespace {

Tensor<float> random_tensor(std::mt19937_64& rng, Shape shape, float lo, float hi, bool grad = false) {
  Tensor<float> t(std::move(shape), grad);
  std::uniform_real_distribution<float> u(lo, hi);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(rng);
  return t;
}

// 3x3 same-padded conv, side x side x channels -> channels.
void BM_Conv3x3(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto ch = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(1);
  const auto x = random_tensor(rng, {side, side, ch}, -1, 1);
  const auto k = random_tensor(rng, {3, 3, ch, ch}, -0.1f, 0.1f);
  const auto b = random_tensor(rng, {ch}, -0.1f, 0.1f);
  for (auto _ : state) {
    Tape<float> tape(false);
    benchmark::DoNotOptimize(ops::conv2d(tape, x, k, b).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_Conv3x3)->Args({64, 16})->Args({64, 32})->Args({128, 32})->Unit(benchmark::kMicrosecond);

// Forward plus backward of the refinement on a 64x64 map with 32 rays.
void BM_CemRefine(benchmark::State& state) {
  const int samples = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  auto d = random_tensor(rng, {64, 64, 32}, 1, 8, true);
  auto c = random_tensor(rng, {64, 64, 32}, -1, 1, true);
  CemWeights<float> w;
  w.mode = Weighting::Cwm;
  const auto n1 = static_cast<std::size_t>(samples + 1);
  w.cwm_kernel = random_tensor(rng, {n1, n1}, -0.5f, 0.5f, true);
  w.cwm_bias = random_tensor(rng, {n1}, -0.1f, 0.1f, true);
  for (auto _ : state) {
    Tape<float> tape;
    const auto r = cem_refine(tape, d, c, samples, w, true);
    tape.backward(ops::sum(tape, r));
    benchmark::DoNotOptimize(d.grad_data());
  }
}
BENCHMARK(BM_CemRefine)->Arg(2)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

std::vector<StarPolygon> synthetic_proposals(int count) {
  SynthConfig cfg;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> score(0, 1);
  std::vector<StarPolygon> out;
  for (int i = 0; i < count; ++i) {
    StarPolygon p = generate_instance(rng, cfg);
    p.score = score(rng);
    out.push_back(std::move(p));
  }
  return out;
}

void BM_Nms(benchmark::State& state) {
  const auto proposals = synthetic_proposals(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(nms(proposals, 0.5).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Nms)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Rasterize(benchmark::State& state) {
  const auto proposals = synthetic_proposals(64);
  SynthConfig cfg;
  for (auto _ : state)
    for (const auto& p : proposals) benchmark::DoNotOptimize(rasterize(p, cfg.height, cfg.width).size());
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Rasterize)->Unit(benchmark::kMicrosecond);

// One optimizer step on a 64x64 crop: forward, losses, backward, Adam.
void BM_TrainStep(benchmark::State& state) {
  SynthConfig sc;
  sc.height = sc.width = 64;
  const SynthImage img = generate_image(sc, 7);
  const auto image = to_tensor(gray8(img.height, img.width, img.pixels));
  BackboneConfig bc;
  bc.levels = 2;
  bc.base_channels = 8;
  bc.rays = 32;
  bc.samples = static_cast<int>(state.range(0));
  bc.weighting = Weighting::Cwm;
  StarNet<float> net(bc, 1);
  Adam<float> adam(net.params(), 1e-3);
  const auto gt = encode_ground_truth(img.labels, RaySet(bc.rays));
  for (auto _ : state) {
    Tape<float> tape;
    const auto out = net.forward(tape, image);
    const auto terms = compute_losses<float>(tape, out, gt, bc.samples, nullptr, nullptr);
    tape.backward(terms.total);
    adam.step();
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(6)->Unit(benchmark::kMillisecond);

}  // namespace
