#include "mfm/sampler.hpp"

#include <algorithm>
#include <memory>

#include "mfm/latents.hpp"

namespace mfm {

VelocityFn model_velocity(const MfmModel& model, const ConditionBundle& bundle, const ConditionBundle& null_bundle) {
  auto cond = std::make_shared<MfmModel::Prepared>(model.prepare(bundle));
  auto uncond = std::make_shared<MfmModel::Prepared>(model.prepare(null_bundle));
  const ConditionBundle* cond_key = &bundle;
  return [&model, cond, uncond, cond_key](const LatentGrid& x, double t, const ConditionBundle& b) {
    const MfmModel::Prepared& p = &b == cond_key ? *cond : *uncond;
    return model.forward(x, p, {t, b.motion_score});
  };
}

SampleResult sample_clip(const MfmModel& model, const ConditionBundle& bundle, const SamplerConfig& cfg, Rng& rng,
                         bool unguided) {
  validate_bundle(bundle);
  validate_sampler(cfg);
  const ConditionBundle null_bundle = null_text(bundle);
  const VelocityFn fn = model_velocity(model, bundle, null_bundle);
  const auto [t, h, w] = LatentCodec::latent_dims(bundle.frames(), bundle.height(), bundle.width());
  const LatentGrid noise = sample_noise(t, h, w, model.config().latent_channels, rng);

  SampleResult out;
  out.latent = unguided ? euler_integrate_unguided(fn, noise, bundle, cfg.steps)
                        : euler_integrate(fn, noise, bundle, null_bundle, cfg);
  out.video = codec_for(model.config()).decode(out.latent, bundle.frames());
  for (double& v : out.video.data) v = std::clamp(v, -1.0, 1.0);
  return out;
}

}  // namespace mfm
