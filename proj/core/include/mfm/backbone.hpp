#pragma once

#include <span>
#include <vector>

#include "mfm/autograd.hpp"
#include "mfm/model_config.hpp"
#include "mfm/ops.hpp"
#include "mfm/params.hpp"
#include "mfm/rope.hpp"
#include "mfm/text.hpp"

namespace mfm {

/// Scalar (0-D) conditions fed through AdaLN.
struct ScalarConditions {
  double timestep = 0.0;
  double motion_score = 0.0;
};

/// Per-block attention captures, indexed by layer.
struct BlockProbe {
  std::vector<ad::AttentionProbe> self_attention;
  std::vector<ad::AttentionProbe> cross_attention;
};

/// Sinusoidal embedding of `value * 1000` with `dim` channels: [cos | sin].
std::vector<double> sinusoidal_embedding(double value, int dim);

/// Per-head RMS normalization with gain (single vector, non-differentiable form).
std::vector<double> qk_norm(std::span<const double> x, std::span<const double> gain, double eps);

/// Diffusion transformer over latent tokens.
class Backbone {
 public:
  struct BlockWeights {
    ad::Var ada_w, ada_b;
    ad::Var q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
    ad::Var q_gain, k_gain;
    ad::Var cq_w, cq_b, ck_w, ck_b, cv_w, cv_b, co_w, co_b;
    ad::Var fc1_w, fc1_b, fc2_w, fc2_b;
  };

  Backbone() = default;
  Backbone(const ModelConfig& config, ParamStore& store, Rng& rng);

  const ModelConfig& config() const { return config_; }

  /// AdaLN conditioning vector c = MLP(sin(t) + sin(ms)), shape [1, D].
  ad::Var condition_vector(const ScalarConditions& scalars) const;

  /// Text rows [S, text_dim]; the null prompt maps to the learned null vector.
  ad::Var text_tokens(const TextEmbedding& text) const;

  /// One transformer block on tokens [L, D].
  ad::Var block(std::size_t layer, const ad::Var& tokens, const ad::Var& text,
                const ad::Var& condition, const RopeTables& rope,
                BlockProbe* probe = nullptr) const;

  /// Latent tokens [L, c] -> velocity [L, c].
  ad::Var forward(const ad::Var& latent_tokens, std::span<const GridPos> positions,
                  const ad::Var& text, const ScalarConditions& scalars,
                  BlockProbe* probe = nullptr) const;

  BlockWeights& block_weights(std::size_t layer) { return blocks_.at(layer); }

 private:
  ModelConfig config_;
  ad::Var embed_w_, embed_b_;
  ad::Var time_fc1_w_, time_fc1_b_, time_fc2_w_, time_fc2_b_;
  std::vector<BlockWeights> blocks_;
  ad::Var final_ada_w_, final_ada_b_, out_w_, out_b_;
  ad::Var null_text_;
};

}  // namespace mfm
