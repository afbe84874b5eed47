#pragma once

#include <functional>

#include "mfm/conditioning.hpp"
#include "mfm/rng.hpp"
#include "mfm/video.hpp"

namespace mfm {

/// One rectified-flow training example.
///   xt = (1 - time) * x0 + time * eps,  v_target = eps - x0
struct FlowSample {
  LatentGrid x0;
  LatentGrid eps;
  double time = 0.0;
  LatentGrid xt;
  LatentGrid v_target;
};

struct SamplerConfig {
  int steps = 50;
  double guidance_scale = 9.0;
};

void validate_sampler(const SamplerConfig& cfg);

/// Logit-normal(0, 1) timestep: sigmoid(z), z ~ N(0, 1); always strictly inside (0, 1).
double sample_logit_normal(Rng& rng);

LatentGrid sample_noise(int t, int h, int w, int c, Rng& rng);

/// Draws eps and a logit-normal time, then builds the interpolant.
FlowSample make_flow_sample(const LatentGrid& x0, Rng& rng);
/// Deterministic construction from given noise and time.
FlowSample make_flow_sample(const LatentGrid& x0, const LatentGrid& eps, double time);

/// Mean squared error between a predicted velocity and the target velocity.
double flow_loss(const LatentGrid& pred_v, const FlowSample& sample);

/// v_uncond + scale * (v_cond - v_uncond); scale 1 and 0 return the inputs exactly.
LatentGrid cfg_velocity(const LatentGrid& v_cond, const LatentGrid& v_uncond, double scale);

/// (x_t, time, bundle) -> velocity.
using VelocityFn = std::function<LatentGrid(const LatentGrid&, double, const ConditionBundle&)>;

/// Explicit Euler from x (at time 1) down to time 0 on a uniform grid with CFG.
/// Throws NumericError naming the step when the state stops being finite.
LatentGrid euler_integrate(const VelocityFn& model, LatentGrid x, const ConditionBundle& bundle,
                           const ConditionBundle& null_bundle, const SamplerConfig& cfg);

/// Same as euler_integrate but starting from standard normal noise drawn from `rng`.
LatentGrid euler_sample(const VelocityFn& model, int t, int h, int w, int c,
                        const ConditionBundle& bundle, const ConditionBundle& null_bundle,
                        const SamplerConfig& cfg, Rng& rng);

/// Plain conditional Euler integration (no guidance branch).
LatentGrid euler_integrate_unguided(const VelocityFn& model, LatentGrid x, const ConditionBundle& bundle,
                                    int steps);

}  // namespace mfm
