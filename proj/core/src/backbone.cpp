#include "mfm/backbone.hpp"

#include <cmath>
#include <string>

#include "mfm/error.hpp"

namespace mfm {

using ad::Var;

std::vector<double> sinusoidal_embedding(double value, int dim) {
  const int half = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
  const double arg = 1000.0 * value;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / static_cast<double>(half));
    out[static_cast<std::size_t>(i)] = std::cos(arg * freq);
    out[static_cast<std::size_t>(half + i)] = std::sin(arg * freq);
  }
  return out;
}

std::vector<double> qk_norm(std::span<const double> x, std::span<const double> gain, double eps) {
  if (x.empty()) throw ShapeError("qk_norm of an empty vector");
  if (gain.size() != x.size()) throw ShapeError("qk_norm gain size mismatch");
  double ss = 0.0;
  for (double v : x) ss += v * v;
  const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + eps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gain[i];
  return out;
}

Backbone::Backbone(const ModelConfig& config, ParamStore& store, Rng& rng) : config_(config) {
  validate_config(config);
  const std::size_t D = static_cast<std::size_t>(config.model_dim());
  const std::size_t F = static_cast<std::size_t>(config.ffn_dim);
  const std::size_t S = static_cast<std::size_t>(config.text_dim);
  const std::size_t C = static_cast<std::size_t>(config.latent_channels);
  const std::size_t d = static_cast<std::size_t>(config.head_dim);
  auto fan_in = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };

  embed_w_ = store.add_normal("embed.x.weight", {C, D}, fan_in(C), rng);
  embed_b_ = store.add_zeros("embed.x.bias", {D});
  time_fc1_w_ = store.add_normal("embed.t.fc1.weight", {D, D}, fan_in(D), rng);
  time_fc1_b_ = store.add_zeros("embed.t.fc1.bias", {D});
  time_fc2_w_ = store.add_normal("embed.t.fc2.weight", {D, D}, fan_in(D), rng);
  time_fc2_b_ = store.add_zeros("embed.t.fc2.bias", {D});

  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "blocks." + std::to_string(l) + ".";
    BlockWeights b;
    b.ada_w = store.add_zeros(p + "ada.weight", {D, 6 * D});
    b.ada_b = store.add_zeros(p + "ada.bias", {6 * D});
    b.q_w = store.add_normal(p + "attn.q.weight", {D, D}, fan_in(D), rng);
    b.q_b = store.add_zeros(p + "attn.q.bias", {D});
    b.k_w = store.add_normal(p + "attn.k.weight", {D, D}, fan_in(D), rng);
    b.k_b = store.add_zeros(p + "attn.k.bias", {D});
    b.v_w = store.add_normal(p + "attn.v.weight", {D, D}, fan_in(D), rng);
    b.v_b = store.add_zeros(p + "attn.v.bias", {D});
    b.o_w = store.add_normal(p + "attn.out.weight", {D, D}, fan_in(D), rng);
    b.o_b = store.add_zeros(p + "attn.out.bias", {D});
    b.q_gain = store.add_constant(p + "attn.q_norm.gain", {d}, 1.0);
    b.k_gain = store.add_constant(p + "attn.k_norm.gain", {d}, 1.0);
    b.cq_w = store.add_normal(p + "cross.q.weight", {D, D}, fan_in(D), rng);
    b.cq_b = store.add_zeros(p + "cross.q.bias", {D});
    b.ck_w = store.add_normal(p + "cross.k.weight", {S, D}, fan_in(S), rng);
    b.ck_b = store.add_zeros(p + "cross.k.bias", {D});
    b.cv_w = store.add_normal(p + "cross.v.weight", {S, D}, fan_in(S), rng);
    b.cv_b = store.add_zeros(p + "cross.v.bias", {D});
    b.co_w = store.add_zeros(p + "cross.out.weight", {D, D});
    b.co_b = store.add_zeros(p + "cross.out.bias", {D});
    b.fc1_w = store.add_normal(p + "ffn.fc1.weight", {D, F}, fan_in(D), rng);
    b.fc1_b = store.add_zeros(p + "ffn.fc1.bias", {F});
    b.fc2_w = store.add_normal(p + "ffn.fc2.weight", {F, D}, fan_in(F), rng);
    b.fc2_b = store.add_zeros(p + "ffn.fc2.bias", {D});
    blocks_.push_back(std::move(b));
  }

  final_ada_w_ = store.add_zeros("final.ada.weight", {D, 2 * D});
  final_ada_b_ = store.add_zeros("final.ada.bias", {2 * D});
  out_w_ = store.add_zeros("final.out.weight", {D, C});
  out_b_ = store.add_zeros("final.out.bias", {C});
  null_text_ = store.add_normal("text.null", {S}, fan_in(S), rng);
}

Var Backbone::condition_vector(const ScalarConditions& scalars) const {
  if (!std::isfinite(scalars.timestep) || !std::isfinite(scalars.motion_score)) {
    throw NumericError("scalar conditions must be finite");
  }
  const int D = config_.model_dim();
  auto te = sinusoidal_embedding(scalars.timestep, D);
  const auto me = sinusoidal_embedding(scalars.motion_score, D);
  for (std::size_t i = 0; i < te.size(); ++i) te[i] += me[i];
  Var e = Var::constant({1, static_cast<std::size_t>(D)}, std::move(te));
  Var h = ad::silu(ad::linear(e, time_fc1_w_, time_fc1_b_));
  return ad::linear(h, time_fc2_w_, time_fc2_b_);
}

Var Backbone::text_tokens(const TextEmbedding& text) const {
  if (text.dim != config_.text_dim) {
    throw ShapeError("text embedding dim " + std::to_string(text.dim) + " != model text_dim " +
                     std::to_string(config_.text_dim));
  }
  if (text.is_null) return ad::reshape(null_text_, {1, static_cast<std::size_t>(text.dim)});
  return Var::constant({static_cast<std::size_t>(text.length), static_cast<std::size_t>(text.dim)},
                       text.data);
}

Var Backbone::block(std::size_t layer, const Var& x, const Var& text, const Var& condition,
                    const RopeTables& rope, BlockProbe* probe) const {
  const BlockWeights& b = blocks_.at(layer);
  const std::size_t D = static_cast<std::size_t>(config_.model_dim());
  const std::size_t H = static_cast<std::size_t>(config_.heads);
  const double eps = config_.norm_eps;

  // shift/scale/gate for the self-attention path, then for the FFN path.
  const Var mod = ad::linear(ad::silu(condition), b.ada_w, b.ada_b);
  const Var shift1 = ad::slice_cols(mod, 0 * D, D), scale1 = ad::slice_cols(mod, 1 * D, D),
            gate1 = ad::slice_cols(mod, 2 * D, D), shift2 = ad::slice_cols(mod, 3 * D, D),
            scale2 = ad::slice_cols(mod, 4 * D, D), gate2 = ad::slice_cols(mod, 5 * D, D);

  ad::AttentionProbe* self_probe = nullptr;
  ad::AttentionProbe* cross_probe = nullptr;
  if (probe) {
    probe->self_attention.resize(config_.layers);
    probe->cross_attention.resize(config_.layers);
    self_probe = &probe->self_attention[layer];
    cross_probe = &probe->cross_attention[layer];
  }

  // 3-D full self-attention with QK-Norm and rotary positions.
  Var h = ad::modulate(ad::layer_norm(x, eps), shift1, scale1);
  Var q = ad::rms_norm_heads(ad::linear(h, b.q_w, b.q_b), b.q_gain, H, eps);
  Var k = ad::rms_norm_heads(ad::linear(h, b.k_w, b.k_b), b.k_gain, H, eps);
  const Var v = ad::linear(h, b.v_w, b.v_b);
  q = ad::rotate_pairs(q, rope.cos, rope.sin, H);
  k = ad::rotate_pairs(k, rope.cos, rope.sin, H);
  Var attn = ad::linear(ad::attention(q, k, v, H, self_probe), b.o_w, b.o_b);
  Var out = ad::gated_add(x, attn, gate1);

  // Cross-attention: queries from tokens, keys/values projected from text.
  const Var cq = ad::linear(ad::layer_norm(out, eps), b.cq_w, b.cq_b);
  const Var ck = ad::linear(text, b.ck_w, b.ck_b);
  const Var cv = ad::linear(text, b.cv_w, b.cv_b);
  out = ad::add(out, ad::linear(ad::attention(cq, ck, cv, H, cross_probe), b.co_w, b.co_b));

  // Feed-forward.
  h = ad::modulate(ad::layer_norm(out, eps), shift2, scale2);
  const Var ff = ad::linear(ad::gelu(ad::linear(h, b.fc1_w, b.fc1_b)), b.fc2_w, b.fc2_b);
  out = ad::gated_add(out, ff, gate2);

  for (double val : out.value()) {
    if (!std::isfinite(val)) throw NumericError("block " + std::to_string(layer) + " produced a non-finite activation");
  }
  return out;
}

Var Backbone::forward(const Var& latent_tokens, std::span<const GridPos> positions, const Var& text,
                      const ScalarConditions& scalars, BlockProbe* probe) const {
  const std::size_t C = static_cast<std::size_t>(config_.latent_channels);
  if (latent_tokens.rank() != 2 || latent_tokens.dim(1) != C) {
    throw ShapeError("backbone expects [L, " + std::to_string(C) + "] latent tokens, got " +
                     ad::shape_string(latent_tokens.shape()));
  }
  if (positions.size() != latent_tokens.dim(0)) throw ShapeError("one grid position per token required");
  const RopeTables rope = rope_tables(positions, config_.head_dim, config_.rope_base);
  const Var condition = condition_vector(scalars);
  Var x = ad::linear(latent_tokens, embed_w_, embed_b_);
  for (std::size_t l = 0; l < blocks_.size(); ++l) x = block(l, x, text, condition, rope, probe);

  const std::size_t D = static_cast<std::size_t>(config_.model_dim());
  const Var mod = ad::linear(ad::silu(condition), final_ada_w_, final_ada_b_);
  const Var y = ad::modulate(ad::layer_norm(x, config_.norm_eps), ad::slice_cols(mod, 0, D),
                             ad::slice_cols(mod, D, D));
  Var v = ad::linear(y, out_w_, out_b_);
  for (double val : v.value()) {
    if (!std::isfinite(val)) throw NumericError("backbone produced a non-finite velocity");
  }
  return v;
}

}  // namespace mfm
