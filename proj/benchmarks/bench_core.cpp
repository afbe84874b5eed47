#include <benchmark/benchmark.h>

#include "mfm/conditioning.hpp"
#include "mfm/flow.hpp"
#include "mfm/latents.hpp"
#include "mfm/model.hpp"
#include "mfm/ops.hpp"

using namespace mfm;

namespace {

std::vector<double> normal_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = standard_normal(rng);
  return v;
}

VideoTensor random_clip(int t, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  VideoTensor v(t, h, w, 3);
  for (double& x : v.data) x = uniform01(rng) * 2.0 - 1.0;
  return v;
}

void BM_Attention(benchmark::State& state) {
  const auto tokens = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 64;
  const auto q = ad::Var::constant({tokens, dim}, normal_values(tokens * dim, 1));
  const auto k = ad::Var::constant({tokens, dim}, normal_values(tokens * dim, 2));
  const auto v = ad::Var::constant({tokens, dim}, normal_values(tokens * dim, 3));
  ad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ad::attention(q, k, v, 4));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tokens));
}
BENCHMARK(BM_Attention)->Arg(32)->Arg(128)->Arg(512);

void BM_Conv3d(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto x = ad::Var::constant({5, side, side, 5}, normal_values(5 * side * side * 5, 4));
  const auto w = ad::Var::constant({3, 3, 3, 5, 16}, normal_values(27 * 5 * 16, 5));
  const auto b = ad::Var::constant({16}, normal_values(16, 6));
  ad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ad::conv3d(x, w, b));
}
BENCHMARK(BM_Conv3d)->Arg(16)->Arg(32);

void BM_ModelForward(benchmark::State& state) {
  const ModelConfig config = model_preset("toy");
  MfmModel model(config, 7);
  model.randomize(8, 0.1);
  Rng rng(9);
  const ConditionBundle bundle = build_condition(random_clip(5, 32, 32, 10), TaskTag::I2V, "a clip", rng);
  const auto prepared = model.prepare(bundle);
  const LatentGrid x = sample_noise(2, 4, 4, config.latent_channels, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, prepared, {0.5, 0.1}));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const ModelConfig config = model_preset("toy");
  MfmModel model(config, 11);
  model.randomize(12, 0.1);
  Rng rng(13);
  const ConditionBundle bundle = build_condition(random_clip(5, 32, 32, 14), TaskTag::I2V, "a clip", rng);
  const FlowSample s = make_flow_sample(sample_noise(2, 4, 4, config.latent_channels, rng), rng);
  for (auto _ : state) {
    model.params().zero_grad();
    const auto prepared = model.prepare(bundle);
    const ad::Var v = model.velocity(latent_to_tokens(s.xt), prepared, {s.time, bundle.motion_score});
    ad::backward(ad::mse(v, s.v_target.data));
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_BuildCondition(benchmark::State& state) {
  const auto task = static_cast<TaskTag>(state.range(0));
  const VideoTensor clip = random_clip(is_image_task(task) ? 1 : 17, 64, 64, 15);
  Rng rng(16);
  for (auto _ : state) benchmark::DoNotOptimize(build_condition(clip, task, "a clip", rng));
  state.SetLabel(std::string(task_short_name(task)));
}
BENCHMARK(BM_BuildCondition)->DenseRange(0, 8)->DenseRange(10, 14);

void BM_CodecEncode(benchmark::State& state) {
  const LatentCodec codec(3, 48);
  const VideoTensor clip = random_clip(17, 64, 64, 17);
  for (auto _ : state) benchmark::DoNotOptimize(codec.encode(clip));
}
BENCHMARK(BM_CodecEncode);

}  // namespace

BENCHMARK_MAIN();
