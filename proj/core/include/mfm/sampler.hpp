#pragma once

#include "mfm/conditioning.hpp"
#include "mfm/flow.hpp"
#include "mfm/model.hpp"

namespace mfm {

struct SampleResult {
  LatentGrid latent;
  VideoTensor video;  // decoded and clamped to [-1, 1]
};

/// Velocity function over the model that prepares `bundle` and its null-text twin once.
VelocityFn model_velocity(const MfmModel& model, const ConditionBundle& bundle, const ConditionBundle& null_bundle);

/// Draws the initial noise from `rng`, integrates with guidance (or without, when
/// `unguided`), and decodes to the bundle's frame count.
SampleResult sample_clip(const MfmModel& model, const ConditionBundle& bundle, const SamplerConfig& cfg, Rng& rng,
                         bool unguided = false);

}  // namespace mfm
