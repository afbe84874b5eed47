#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfm/adapter.hpp"
#include "mfm/backbone.hpp"
#include "mfm/conditioning.hpp"
#include "mfm/latents.hpp"
#include "mfm/model_config.hpp"
#include "mfm/params.hpp"
#include "mfm/video.hpp"

namespace mfm {

/// Adapter + backbone + learned null text vector: the velocity predictor
/// mu(t, x_t, ms, c, Y).
class MfmModel {
 public:
  MfmModel(const ModelConfig& config, std::uint64_t seed);

  MfmModel(const MfmModel&) = delete;
  MfmModel& operator=(const MfmModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ConditionAdapter& adapter() const { return adapter_; }
  const Backbone& backbone() const { return backbone_; }

  /// Conditioning that is constant along a sampling trajectory.
  struct Prepared {
    ad::Var feature;  // adapter output [L, c]
    ad::Var text;     // [S, text_dim]
    std::vector<GridPos> positions;
    int t = 0, h = 0, w = 0;
  };
  Prepared prepare(const ConditionBundle& bundle) const;

  /// Differentiable velocity for latent tokens x_t [L, c].
  ad::Var velocity(const ad::Var& xt_tokens, const Prepared& prepared, const ScalarConditions& scalars,
                   BlockProbe* probe = nullptr) const;

  /// Velocity prediction for a latent grid (no graph recorded).
  LatentGrid forward(const LatentGrid& xt, const ConditionBundle& bundle,
                     const ScalarConditions& scalars) const;
  LatentGrid forward(const LatentGrid& xt, const Prepared& prepared, const ScalarConditions& scalars) const;

  /// Replaces every parameter with N(0, stddev^2) noise (gradient checks need non-zero paths).
  void randomize(std::uint64_t seed, double stddev);

  /// Parameter-group label of a parameter name (embedding, adaln, attention, ...).
  static std::string parameter_group(const std::string& name);

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  ParamStore params_;
  ConditionAdapter adapter_;
  Backbone backbone_;
};

/// RGB codec whose latent width matches the model.
LatentCodec codec_for(const ModelConfig& config);

ad::Var latent_to_tokens(const LatentGrid& latent);
LatentGrid tokens_to_latent(const ad::Var& tokens, int t, int h, int w);

}  // namespace mfm
