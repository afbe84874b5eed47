#include "mfm/flow.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mfm/error.hpp"

namespace mfm {

void validate_sampler(const SamplerConfig& cfg) {
  if (cfg.steps < 1) throw ValidationError("sampler needs at least one step");
  if (!(cfg.guidance_scale >= 0.0) || !std::isfinite(cfg.guidance_scale)) {
    throw ValidationError("guidance scale must be finite and >= 0");
  }
}

double sample_logit_normal(Rng& rng) {
  const double z = standard_normal(rng);
  double t = 1.0 / (1.0 + std::exp(-z));
  if (t <= 0.0) t = std::numeric_limits<double>::min();
  if (t >= 1.0) t = std::nextafter(1.0, 0.0);
  return t;
}

LatentGrid sample_noise(int t, int h, int w, int c, Rng& rng) {
  LatentGrid g(t, h, w, c);
  for (double& v : g.data) v = standard_normal(rng);
  return g;
}

FlowSample make_flow_sample(const LatentGrid& x0, const LatentGrid& eps, double time) {
  require_same_shape(x0, eps, "make_flow_sample");
  if (!(time >= 0.0 && time <= 1.0)) throw ValidationError("flow time must lie in [0, 1]");
  FlowSample s;
  s.x0 = x0;
  s.eps = eps;
  s.time = time;
  s.xt = LatentGrid(x0.t, x0.h, x0.w, x0.c);
  s.v_target = LatentGrid(x0.t, x0.h, x0.w, x0.c);
  const double keep = 1.0 - time;
  for (std::size_t i = 0; i < x0.data.size(); ++i) {
    s.xt.data[i] = keep * x0.data[i] + time * eps.data[i];
    s.v_target.data[i] = eps.data[i] - x0.data[i];
  }
  return s;
}

FlowSample make_flow_sample(const LatentGrid& x0, Rng& rng) {
  for (double v : x0.data) {
    if (!std::isfinite(v)) throw NumericError("flow sample data must be finite");
  }
  const LatentGrid eps = sample_noise(x0.t, x0.h, x0.w, x0.c, rng);
  const double time = sample_logit_normal(rng);
  return make_flow_sample(x0, eps, time);
}

double flow_loss(const LatentGrid& pred_v, const FlowSample& sample) {
  require_same_shape(pred_v, sample.v_target, "flow_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < pred_v.data.size(); ++i) {
    const double d = pred_v.data[i] - sample.v_target.data[i];
    s += d * d;
  }
  return s / static_cast<double>(pred_v.data.size());
}

LatentGrid cfg_velocity(const LatentGrid& v_cond, const LatentGrid& v_uncond, double scale) {
  require_same_shape(v_cond, v_uncond, "cfg_velocity");
  if (scale == 1.0) return v_cond;
  if (scale == 0.0) return v_uncond;
  LatentGrid out = v_uncond;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = v_uncond.data[i] + scale * (v_cond.data[i] - v_uncond.data[i]);
  }
  return out;
}

namespace {

void euler_update(LatentGrid& x, const LatentGrid& v, double dt, int step) {
  require_same_shape(x, v, "euler step");
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    x.data[i] -= dt * v.data[i];
    if (!std::isfinite(x.data[i])) {
      throw NumericError("sampler state became non-finite at step " + std::to_string(step));
    }
  }
}

}  // namespace

LatentGrid euler_integrate(const VelocityFn& model, LatentGrid x, const ConditionBundle& bundle,
                           const ConditionBundle& null_bundle, const SamplerConfig& cfg) {
  validate_sampler(cfg);
  const double dt = 1.0 / cfg.steps;
  for (int k = 0; k < cfg.steps; ++k) {
    const double time = 1.0 - k * dt;
    const LatentGrid v_cond = model(x, time, bundle);
    const LatentGrid v = cfg.guidance_scale == 1.0
                             ? v_cond
                             : cfg_velocity(v_cond, model(x, time, null_bundle), cfg.guidance_scale);
    euler_update(x, v, dt, k);
  }
  return x;
}

LatentGrid euler_integrate_unguided(const VelocityFn& model, LatentGrid x, const ConditionBundle& bundle,
                                    int steps) {
  if (steps < 1) throw ValidationError("sampler needs at least one step");
  const double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    const double time = 1.0 - k * dt;
    euler_update(x, model(x, time, bundle), dt, k);
  }
  return x;
}

LatentGrid euler_sample(const VelocityFn& model, int t, int h, int w, int c, const ConditionBundle& bundle,
                        const ConditionBundle& null_bundle, const SamplerConfig& cfg, Rng& rng) {
  validate_sampler(cfg);
  return euler_integrate(model, sample_noise(t, h, w, c, rng), bundle, null_bundle, cfg);
}

}  // namespace mfm
