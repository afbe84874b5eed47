#include "mfm/adapter.hpp"

#include <cmath>

#include "mfm/error.hpp"
#include "mfm/latents.hpp"
#include "mfm/ops.hpp"

namespace mfm {

ConditionAdapter::ConditionAdapter(const AdapterParams& params, ParamStore& store, Rng& rng,
                                   const std::string& prefix)
    : params_(params) {
  if (params.kernel % 2 != 1) throw ValidationError("adapter kernel must be odd");
  const std::size_t k = static_cast<std::size_t>(params.kernel);
  const std::array<int, 5> chans{params.in_channels, params.widths[0], params.widths[1],
                                 params.widths[2], params.out_channels};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto cin = static_cast<std::size_t>(chans[i]);
    const auto cout = static_cast<std::size_t>(chans[i + 1]);
    const std::string name = prefix + ".conv" + std::to_string(i);
    if (i == 3) {
      weights_[i] = store.add_zeros(name + ".weight", {k, k, k, cin, cout});
    } else {
      const double stddev = std::sqrt(2.0 / static_cast<double>(k * k * k * cin));
      weights_[i] = store.add_normal(name + ".weight", {k, k, k, cin, cout}, stddev, rng);
    }
    biases_[i] = store.add_zeros(name + ".bias", {cout});
  }
}

ad::Var ConditionAdapter::forward(const VideoTensor& condition) const {
  if (condition.channels != params_.in_channels) {
    throw ShapeError("adapter expects " + std::to_string(params_.in_channels) + " condition channels, got " +
                     std::to_string(condition.channels));
  }
  LatentCodec::latent_dims(condition.frames, condition.height, condition.width);
  ad::Var x = ad::Var::constant({static_cast<std::size_t>(condition.frames),
                                 static_cast<std::size_t>(condition.height),
                                 static_cast<std::size_t>(condition.width),
                                 static_cast<std::size_t>(condition.channels)},
                                condition.data);
  x = ad::avg_pool_spatial2(ad::silu(ad::conv3d(x, weights_[0], biases_[0])));
  x = ad::avg_pool_spatial2(ad::silu(ad::conv3d(x, weights_[1], biases_[1])));
  x = ad::temporal_group4(ad::avg_pool_spatial2(ad::silu(ad::conv3d(x, weights_[2], biases_[2]))));
  x = ad::conv3d(x, weights_[3], biases_[3]);
  for (double v : x.value()) {
    if (!std::isfinite(v)) throw NumericError("adapter produced a non-finite activation");
  }
  return x;
}

LatentGrid ConditionAdapter::adapt(const ConditionBundle& bundle) const {
  ad::NoGradGuard guard;
  const ad::Var y = forward(condition_input(bundle));
  LatentGrid out(static_cast<int>(y.dim(0)), static_cast<int>(y.dim(1)), static_cast<int>(y.dim(2)),
                 static_cast<int>(y.dim(3)));
  std::copy(y.value().begin(), y.value().end(), out.data.begin());
  return out;
}

LatentGrid inject(const LatentGrid& latent, const LatentGrid& feature) {
  require_same_shape(latent, feature, "inject");
  LatentGrid out = latent;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += feature.data[i];
  return out;
}

}  // namespace mfm
