#pragma once

#include <array>
#include <string>

#include "mfm/autograd.hpp"
#include "mfm/conditioning.hpp"
#include "mfm/params.hpp"
#include "mfm/video.hpp"

namespace mfm {

/// Layer widths of the condition adapter.
struct AdapterParams {
  int in_channels = kConditionChannels;
  std::array<int, 3> widths{16, 16, 16};
  int out_channels = 48;
  int kernel = 3;
};

/// Lightweight condition adapter.
///
///   conv(5 -> w0) -> pool2 -> conv(w0 -> w1) -> pool2 -> conv(w1 -> w2)
///   -> pool2 + temporal grouping -> conv(w2 -> c)
///
/// SiLU follows every hidden conv. The last conv is zero-initialized, so the
/// adapter is a no-op for every task at initialization.
class ConditionAdapter {
 public:
  ConditionAdapter() = default;
  ConditionAdapter(const AdapterParams& params, ParamStore& store, Rng& rng,
                   const std::string& prefix = "adapter");

  const AdapterParams& params() const { return params_; }

  /// [T, H, W, 5] condition -> [t, h, w, c] feature.
  ad::Var forward(const VideoTensor& condition) const;
  /// Non-differentiable convenience returning a LatentGrid.
  LatentGrid adapt(const ConditionBundle& bundle) const;

 private:
  AdapterParams params_;
  std::array<ad::Var, 4> weights_;
  std::array<ad::Var, 4> biases_;
};

/// Element-wise sum of a latent and an adapter feature of identical shape.
LatentGrid inject(const LatentGrid& latent, const LatentGrid& feature);

}  // namespace mfm
