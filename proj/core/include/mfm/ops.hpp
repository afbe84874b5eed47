#pragma once

#include <cstddef>
#include <vector>

#include "mfm/autograd.hpp"

namespace mfm::ad {

// Dense 2-D algebra. Row vectors are rank-1 tensors of length m broadcast over rows.
Var matmul(const Var& a, const Var& b);                       // [n,k] x [k,m]
Var linear(const Var& x, const Var& weight, const Var& bias);  // x W + b, bias may be undefined
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var reshape(const Var& a, Shape shape);

Var silu(const Var& x);
Var gelu(const Var& x);  // tanh approximation

/// Columns [start, start + len) of a row vector or matrix.
Var slice_cols(const Var& x, std::size_t start, std::size_t len);

/// Parameter-free layer normalization over the last dimension.
Var layer_norm(const Var& x, double eps = 1e-6);

/// x * (1 + scale) + shift with row-vector scale/shift.
Var modulate(const Var& x, const Var& shift, const Var& scale);

/// x + gate * y with a row-vector gate.
Var gated_add(const Var& x, const Var& y, const Var& gate);

/// Per-head RMS normalization of [n, heads*head_dim] with a head_dim gain shared by heads.
Var rms_norm_heads(const Var& x, const Var& gain, std::size_t heads, double eps);

/// Fixed (non-learned) rotation of channel pairs by per-row angles.
/// `cos_table`/`sin_table` are [n, head_dim/2]; pair j rotates channels (2j, 2j+1) of every head.
Var rotate_pairs(const Var& x, const std::vector<double>& cos_table,
                 const std::vector<double>& sin_table, std::size_t heads);

/// Optional capture of attention internals for tests and diagnostics.
struct AttentionProbe {
  std::size_t heads = 0;
  std::size_t queries = 0;
  std::size_t keys = 0;
  std::vector<double> probabilities;  // [heads, queries, keys]
  double max_abs_logit = 0.0;          // before the 1/sqrt(d) scaling
};

/// Multi-head scaled dot-product attention without masking:
/// softmax(q k^T / sqrt(d)) v per head. q: [n, H*d], k and v: [m, H*d].
Var attention(const Var& q, const Var& k, const Var& v, std::size_t heads,
              AttentionProbe* probe = nullptr);

// Channels-last video ops over [T, H, W, C].
/// Zero-padded "same" 3-D convolution; weight [kt, kh, kw, Cin, Cout], bias [Cout].
Var conv3d(const Var& x, const Var& weight, const Var& bias);
/// 2x2 spatial average pooling; H and W must be even.
Var avg_pool_spatial2(const Var& x);
/// Temporal 4x grouping with the first frame kept on its own when T is 1 mod 4.
Var temporal_group4(const Var& x);

Var mean(const Var& x);
/// mean((pred - target)^2) with a constant target.
Var mse(const Var& pred, const std::vector<double>& target);

}  // namespace mfm::ad
