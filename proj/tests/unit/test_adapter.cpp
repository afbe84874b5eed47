#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "mfm/adapter.hpp"
#include "mfm/error.hpp"
#include "mfm/model.hpp"

using namespace mfm;

namespace {

VideoTensor random_condition(int t, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  VideoTensor v(t, h, w, kConditionChannels);
  for (double& x : v.data) x = uniform01(rng) * 2.0 - 1.0;
  return v;
}

}  // namespace

TEST(Adapter, OutputMatchesLatentDims) {
  ParamStore store;
  Rng rng(1);
  AdapterParams p;
  p.widths = {4, 4, 4};
  p.out_channels = 6;
  const ConditionAdapter adapter(p, store, rng);
  for (int t : {1, 4, 5, 9}) {
    for (int h : {8, 16}) {
      for (int w : {8, 24}) {
        const ad::Var y = adapter.forward(random_condition(t, h, w, 2));
        const auto d = LatentCodec::latent_dims(t, h, w);
        EXPECT_EQ(y.shape(), (ad::Shape{static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]),
                                         static_cast<std::size_t>(d[2]), 6u}));
      }
    }
  }
  EXPECT_THROW(adapter.forward(random_condition(3, 8, 8, 2)), ShapeError);
  EXPECT_THROW(adapter.forward(VideoTensor(1, 8, 8, 3)), ShapeError);
}

TEST(Adapter, StageOneResolution) {
  ParamStore store;
  Rng rng(1);
  AdapterParams p;
  p.widths = {2, 2, 2};
  p.out_channels = 2;
  p.kernel = 1;
  const ConditionAdapter adapter(p, store, rng);
  const ad::Var y = adapter.forward(VideoTensor(49, 128, 224, kConditionChannels));
  EXPECT_EQ(y.shape(), (ad::Shape{13, 16, 28, 2}));
}

TEST(Adapter, ZeroInitializedOutputIsANoOp) {
  ParamStore store;
  Rng rng(3);
  const ConditionAdapter adapter({}, store, rng);
  const ad::Var y = adapter.forward(random_condition(5, 16, 16, 4));
  for (double v : y.value()) EXPECT_EQ(v, 0.0);
  LatentGrid z(2, 2, 2, 48, 0.5);
  LatentGrid f(2, 2, 2, 48, 0.25);
  EXPECT_EQ(inject(z, f).data[7], 0.75);
  EXPECT_THROW(inject(z, LatentGrid(1, 2, 2, 48)), ShapeError);
}

TEST(Adapter, GradientsMatchFiniteDifferences) {
  ParamStore store;
  Rng rng(5);
  AdapterParams p;
  p.widths = {3, 3, 3};
  p.out_channels = 2;
  const ConditionAdapter adapter(p, store, rng);
  Rng init(6);
  std::vector<ad::Var> params;
  for (auto& [name, var] : store.entries()) {
    ad::Var v = var;
    auto values = v.mutable_value();
    const auto fresh = mfm::testing::random_values(values.size(), init, 0.4);
    std::copy(fresh.begin(), fresh.end(), values.begin());
    params.push_back(v);
  }
  const VideoTensor cond = random_condition(5, 8, 8, 7);
  const auto f = [&] { return mfm::testing::probe_loss(adapter.forward(cond)); };
  EXPECT_LT(mfm::testing::gradcheck(f, params), 1e-5);
}

TEST(Adapter, ParameterShareOfLargePresets) {
  for (const char* name : {"2B", "8B"}) {
    const ModelConfig c = model_preset(name);
    const double share = static_cast<double>(adapter_parameter_count(c)) /
                         static_cast<double>(adapter_parameter_count(c) + backbone_parameter_count(c));
    EXPECT_LT(share, 0.01) << name;
  }
}

TEST(Adapter, AnalyticCountMatchesAllocation) {
  const ModelConfig c = model_preset("toy");
  MfmModel model(c, 1);
  std::size_t adapter = 0, rest = 0;
  for (const auto& [name, var] : model.params().entries()) {
    (MfmModel::parameter_group(name) == "adapter" ? adapter : rest) += var.size();
  }
  EXPECT_EQ(adapter, adapter_parameter_count(c));
  EXPECT_EQ(rest, backbone_parameter_count(c));
}
