#include "mfm/model.hpp"

#include <cmath>

#include "mfm/error.hpp"
#include "mfm/latents.hpp"
#include "mfm/ops.hpp"
#include "mfm/rng.hpp"
#include "mfm/tensor_io.hpp"
#include "mfm/text.hpp"

namespace mfm {
namespace {

AdapterParams adapter_params(const ModelConfig& c) {
  AdapterParams p;
  p.widths = {c.adapter_width, c.adapter_width, c.adapter_width};
  p.out_channels = c.latent_channels;
  return p;
}

}  // namespace

LatentCodec codec_for(const ModelConfig& config) { return LatentCodec(3, config.latent_channels); }

ad::Var latent_to_tokens(const LatentGrid& latent) {
  return ad::Var::constant({latent.tokens(), static_cast<std::size_t>(latent.c)}, latent.data);
}

LatentGrid tokens_to_latent(const ad::Var& tokens, int t, int h, int w) {
  LatentGrid g(t, h, w, static_cast<int>(tokens.dim(1)));
  if (g.size() != tokens.size()) throw ShapeError("token count does not match latent grid");
  std::copy(tokens.value().begin(), tokens.value().end(), g.data.begin());
  return g;
}

MfmModel::MfmModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  validate_config(config);
  Rng adapter_rng(derive_seed(seed, "adapter"));
  Rng backbone_rng(derive_seed(seed, "backbone"));
  adapter_ = ConditionAdapter(adapter_params(config), params_, adapter_rng);
  backbone_ = Backbone(config, params_, backbone_rng);
}

MfmModel::Prepared MfmModel::prepare(const ConditionBundle& bundle) const {
  const auto [t, h, w] = LatentCodec::latent_dims(bundle.frames(), bundle.height(), bundle.width());
  Prepared p;
  p.t = t;
  p.h = h;
  p.w = w;
  const ad::Var feature = adapter_.forward(condition_input(bundle));
  p.feature = ad::reshape(feature, {static_cast<std::size_t>(t) * h * w,
                                    static_cast<std::size_t>(config_.latent_channels)});
  p.text = backbone_.text_tokens(embed_text(bundle.prompt, config_.text_dim, config_.max_text_len));
  p.positions = grid_positions(t, h, w);
  return p;
}

ad::Var MfmModel::velocity(const ad::Var& xt_tokens, const Prepared& prepared,
                           const ScalarConditions& scalars, BlockProbe* probe) const {
  if (xt_tokens.shape() != prepared.feature.shape()) {
    throw ShapeError("latent " + ad::shape_string(xt_tokens.shape()) + " does not match condition feature " +
                     ad::shape_string(prepared.feature.shape()));
  }
  const ad::Var injected = ad::add(xt_tokens, prepared.feature);
  return backbone_.forward(injected, prepared.positions, prepared.text, scalars, probe);
}

LatentGrid MfmModel::forward(const LatentGrid& xt, const Prepared& prepared,
                             const ScalarConditions& scalars) const {
  ad::NoGradGuard guard;
  if (xt.t != prepared.t || xt.h != prepared.h || xt.w != prepared.w || xt.c != config_.latent_channels) {
    throw ShapeError("latent grid does not match the prepared conditions");
  }
  return tokens_to_latent(velocity(latent_to_tokens(xt), prepared, scalars), xt.t, xt.h, xt.w);
}

LatentGrid MfmModel::forward(const LatentGrid& xt, const ConditionBundle& bundle,
                             const ScalarConditions& scalars) const {
  ad::NoGradGuard guard;
  return forward(xt, prepare(bundle), scalars);
}

void MfmModel::randomize(std::uint64_t seed, double stddev) {
  Rng rng(seed);
  for (auto& [name, var] : params_.entries()) {
    ad::Var v = var;
    for (double& x : v.mutable_value()) x = stddev * standard_normal(rng);
    if (name.find("norm.gain") != std::string::npos) {
      for (double& x : v.mutable_value()) x = 1.0 + x;
    }
  }
}

std::string MfmModel::parameter_group(const std::string& name) {
  if (name.rfind("adapter.", 0) == 0) return "adapter";
  if (name.rfind("embed.", 0) == 0) return "embedding";
  if (name.rfind("text.", 0) == 0) return "text";
  if (name.find("norm.gain") != std::string::npos) return "qk_norm";
  if (name.find(".ada.") != std::string::npos) return "adaln";
  if (name.find(".cross.") != std::string::npos) return "cross_attention";
  if (name.find(".attn.") != std::string::npos) return "self_attention";
  if (name.find(".ffn.") != std::string::npos) return "ffn";
  if (name.rfind("final.out", 0) == 0) return "output";
  return "other";
}

void MfmModel::save(const std::filesystem::path& path) const { io::save_named(path, params_.to_named()); }

void MfmModel::load(const std::filesystem::path& path) { params_.load_named(io::load_named(path)); }

}  // namespace mfm
