#include "mfm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mfm/error.hpp"
#include "mfm/video.hpp"

namespace mfm::ad {
namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

// Parent gradient buffer, or nullptr when the parent is a constant.
std::vector<double>* pgrad(Node& self, std::size_t i) {
  Node* p = self.parents[i].get();
  return p->requires_grad ? &p->grad_buffer() : nullptr;
}

const std::vector<double>& pval(Node& self, std::size_t i) { return self.parents[i]->value; }

std::size_t rows_of(const Var& x) { return x.rank() == 1 ? 1 : x.dim(0); }
std::size_t cols_of(const Var& x) { return x.shape().back(); }

void require_rowvec(const Var& r, std::size_t m, const char* what) {
  require(r.size() == m, std::string(what) + ": row vector of size " + std::to_string(r.size()) +
                             " does not match width " + std::to_string(m));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m, 0.0);
  const double* A = a.value().data();
  const double* B = b.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* br = B + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return make_result({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    const double* G = self.grad.data();
    const auto& A = pval(self, 0);
    const auto& B = pval(self, 1);
    if (auto* ga = pgrad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* br = B.data() + p * m;
          const double* gr = G + i * m;
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += gr[j] * br[j];
          (*ga)[i * k + p] += s;
        }
      }
    }
    if (auto* gb = pgrad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* gr = G + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          double* dst = gb->data() + p * m;
          for (std::size_t j = 0; j < m; ++j) dst[j] += av * gr[j];
        }
      }
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  Var y = matmul(x.rank() == 1 ? reshape(x, {1, x.size()}) : x, weight);
  if (!bias.defined()) return y;
  const std::size_t n = y.dim(0), m = y.dim(1);
  require_rowvec(bias, m, "linear bias");
  std::vector<double> out(y.value().begin(), y.value().end());
  const auto bv = bias.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
  return make_result({n, m}, std::move(out), {y, bias}, [n, m](Node& self) {
    const auto& G = self.grad;
    if (auto* gy = pgrad(self, 0))
      for (std::size_t i = 0; i < G.size(); ++i) (*gy)[i] += G[i];
    if (auto* gbias = pgrad(self, 1))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*gbias)[j] += G[i * m + j];
  });
}

Var add(const Var& a, const Var& b) {
  require(a.shape() == b.shape(), "add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<double> out(a.size());
  const auto av = a.value(), bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& G = self.grad;
    for (std::size_t p = 0; p < 2; ++p)
      if (auto* g = pgrad(self, p))
        for (std::size_t i = 0; i < G.size(); ++i) (*g)[i] += G[i];
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.shape() == b.shape(), "sub: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<double> out(a.size());
  const auto av = a.value(), bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& G = self.grad;
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < G.size(); ++i) (*g)[i] += G[i];
    if (auto* g = pgrad(self, 1))
      for (std::size_t i = 0; i < G.size(); ++i) (*g)[i] -= G[i];
  });
}

Var mul(const Var& a, const Var& b) {
  require(a.shape() == b.shape(), "mul: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<double> out(a.size());
  const auto av = a.value(), bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& G = self.grad;
    const auto& A = pval(self, 0);
    const auto& B = pval(self, 1);
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < G.size(); ++i) (*g)[i] += G[i] * B[i];
    if (auto* g = pgrad(self, 1))
      for (std::size_t i = 0; i < G.size(); ++i) (*g)[i] += G[i] * A[i];
  });
}

Var scale(const Var& a, double s) {
  std::vector<double> out(a.value().begin(), a.value().end());
  for (double& v : out) v *= s;
  return make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += s * self.grad[i];
  });
}

Var reshape(const Var& a, Shape shape) {
  require(shape_size(shape) == a.size(),
          "reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  std::vector<double> out(a.value().begin(), a.value().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  });
}

Var silu(const Var& x) {
  std::vector<double> out(x.size());
  const auto xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] / (1.0 + std::exp(-xv[i]));
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    const auto& X = pval(self, 0);
    for (std::size_t i = 0; i < X.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-X[i]));
      (*g)[i] += self.grad[i] * s * (1.0 + X[i] * (1.0 - s));
    }
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(const Var& x) {
  std::vector<double> out(x.size());
  const auto xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xv[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    const auto& X = pval(self, 0);
    for (std::size_t i = 0; i < X.size(); ++i) {
      const double v = X[i];
      const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double d = 0.5 * (1.0 + th) +
                       0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      (*g)[i] += self.grad[i] * d;
    }
  });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t len) {
  const std::size_t n = rows_of(x), m = cols_of(x);
  require(start + len <= m, "slice_cols out of range");
  std::vector<double> out(n * len);
  const auto xv = x.value();
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(xv.data() + i * m + start, len, out.data() + i * len);
  Shape shape = x.rank() == 1 ? Shape{len} : Shape{n, len};
  return make_result(std::move(shape), std::move(out), {x}, [n, m, start, len](Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < len; ++j) (*g)[i * m + start + j] += self.grad[i * len + j];
  });
}

Var layer_norm(const Var& x, double eps) {
  const std::size_t n = rows_of(x), m = cols_of(x);
  std::vector<double> out(x.size());
  std::vector<double> inv_std(n);
  const auto xv = x.value();
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = xv.data() + i * m;
    double mu = 0.0;
    for (std::size_t j = 0; j < m; ++j) mu += r[j];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) var += (r[j] - mu) * (r[j] - mu);
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = (r[j] - mu) * inv_std[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [n, m, inv_std](Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    const auto& Y = self.value;
    const auto& G = self.grad;
    for (std::size_t i = 0; i < n; ++i) {
      const double* y = Y.data() + i * m;
      const double* gy = G.data() + i * m;
      double mg = 0.0, mgy = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        mg += gy[j];
        mgy += gy[j] * y[j];
      }
      mg /= static_cast<double>(m);
      mgy /= static_cast<double>(m);
      for (std::size_t j = 0; j < m; ++j) (*g)[i * m + j] += inv_std[i] * (gy[j] - mg - y[j] * mgy);
    }
  });
}

Var modulate(const Var& x, const Var& shift, const Var& scale_vec) {
  const std::size_t n = rows_of(x), m = cols_of(x);
  require_rowvec(shift, m, "modulate shift");
  require_rowvec(scale_vec, m, "modulate scale");
  std::vector<double> out(x.size());
  const auto xv = x.value(), sh = shift.value(), sc = scale_vec.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = xv[i * m + j] * (1.0 + sc[j]) + sh[j];
  return make_result(x.shape(), std::move(out), {x, shift, scale_vec}, [n, m](Node& self) {
    const auto& G = self.grad;
    const auto& X = pval(self, 0);
    const auto& SC = pval(self, 2);
    auto* gx = pgrad(self, 0);
    auto* gsh = pgrad(self, 1);
    auto* gsc = pgrad(self, 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double gv = G[i * m + j];
        if (gx) (*gx)[i * m + j] += gv * (1.0 + SC[j]);
        if (gsh) (*gsh)[j] += gv;
        if (gsc) (*gsc)[j] += gv * X[i * m + j];
      }
    }
  });
}

Var gated_add(const Var& x, const Var& y, const Var& gate) {
  require(x.shape() == y.shape(), "gated_add: shape mismatch");
  const std::size_t n = rows_of(x), m = cols_of(x);
  require_rowvec(gate, m, "gated_add gate");
  std::vector<double> out(x.size());
  const auto xv = x.value(), yv = y.value(), gv = gate.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = xv[i * m + j] + gv[j] * yv[i * m + j];
  return make_result(x.shape(), std::move(out), {x, y, gate}, [n, m](Node& self) {
    const auto& G = self.grad;
    const auto& Y = pval(self, 1);
    const auto& GT = pval(self, 2);
    auto* gx = pgrad(self, 0);
    auto* gy = pgrad(self, 1);
    auto* gg = pgrad(self, 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double gv = G[i * m + j];
        if (gx) (*gx)[i * m + j] += gv;
        if (gy) (*gy)[i * m + j] += gv * GT[j];
        if (gg) (*gg)[j] += gv * Y[i * m + j];
      }
    }
  });
}

Var rms_norm_heads(const Var& x, const Var& gain, std::size_t heads, double eps) {
  const std::size_t n = rows_of(x), m = cols_of(x);
  require(heads > 0 && m % heads == 0, "rms_norm_heads: width not divisible by heads");
  const std::size_t d = m / heads;
  require_rowvec(gain, d, "rms_norm_heads gain");
  std::vector<double> out(x.size());
  std::vector<double> inv_rms(n * heads);
  const auto xv = x.value(), gv = gain.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      const double* r = xv.data() + i * m + h * d;
      double ss = 0.0;
      for (std::size_t j = 0; j < d; ++j) ss += r[j] * r[j];
      const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + eps);
      inv_rms[i * heads + h] = inv;
      for (std::size_t j = 0; j < d; ++j) out[i * m + h * d + j] = r[j] * inv * gv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain}, [n, m, d, heads, inv_rms](Node& self) {
    const auto& G = self.grad;
    const auto& X = pval(self, 0);
    const auto& GN = pval(self, 1);
    auto* gx = pgrad(self, 0);
    auto* gg = pgrad(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = i * m + h * d;
        const double inv = inv_rms[i * heads + h];
        double dot = 0.0;  // sum_j gain_j * g_j * x_j
        for (std::size_t j = 0; j < d; ++j) {
          dot += GN[j] * G[off + j] * X[off + j];
          if (gg) (*gg)[j] += G[off + j] * X[off + j] * inv;
        }
        if (gx) {
          const double c = dot * inv * inv * inv / static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) (*gx)[off + j] += GN[j] * G[off + j] * inv - X[off + j] * c;
        }
      }
    }
  });
}

Var rotate_pairs(const Var& x, const std::vector<double>& cos_table,
                 const std::vector<double>& sin_table, std::size_t heads) {
  const std::size_t n = rows_of(x), m = cols_of(x);
  require(heads > 0 && m % heads == 0, "rotate_pairs: width not divisible by heads");
  const std::size_t d = m / heads;
  require(d % 2 == 0, "rotate_pairs: odd head dim");
  const std::size_t half = d / 2;
  require(cos_table.size() == n * half && sin_table.size() == n * half,
          "rotate_pairs: angle table does not match [tokens, head_dim/2]");
  std::vector<double> out(x.size());
  const auto xv = x.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t p = 0; p < half; ++p) {
        const std::size_t a = i * m + h * d + 2 * p;
        const double c = cos_table[i * half + p], s = sin_table[i * half + p];
        out[a] = xv[a] * c - xv[a + 1] * s;
        out[a + 1] = xv[a] * s + xv[a + 1] * c;
      }
    }
  }
  return make_result(x.shape(), std::move(out), {x},
                     [n, m, d, half, heads, cos_table, sin_table](Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       const auto& G = self.grad;
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t h = 0; h < heads; ++h) {
                           for (std::size_t p = 0; p < half; ++p) {
                             const std::size_t a = i * m + h * d + 2 * p;
                             const double c = cos_table[i * half + p], s = sin_table[i * half + p];
                             (*g)[a] += G[a] * c + G[a + 1] * s;
                             (*g)[a + 1] += -G[a] * s + G[a + 1] * c;
                           }
                         }
                       }
                     });
}

Var attention(const Var& q, const Var& k, const Var& v, std::size_t heads, AttentionProbe* probe) {
  require(q.rank() == 2 && k.rank() == 2 && v.rank() == 2, "attention expects rank-2 inputs");
  require(k.shape() == v.shape(), "attention: key/value shapes differ");
  const std::size_t n = q.dim(0), m = k.dim(0), width = q.dim(1);
  require(k.dim(1) == width, "attention: query/key widths differ");
  require(heads > 0 && width % heads == 0, "attention: width not divisible by heads");
  const std::size_t d = width / heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  const auto Q = q.value(), K = k.value(), V = v.value();
  std::vector<double> probs(heads * n * m);
  std::vector<double> out(n * width, 0.0);
  double max_abs_logit = 0.0;
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      double* pr = probs.data() + (h * n + i) * m;
      const double* qi = Q.data() + i * width + h * d;
      double mx = -INFINITY;
      for (std::size_t j = 0; j < m; ++j) {
        const double* kj = K.data() + j * width + h * d;
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += qi[c] * kj[c];
        max_abs_logit = std::max(max_abs_logit, std::abs(dot));
        pr[j] = dot * inv_sqrt_d;
        mx = std::max(mx, pr[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        pr[j] = std::exp(pr[j] - mx);
        z += pr[j];
      }
      const double inv_z = 1.0 / z;
      double* oi = out.data() + i * width + h * d;
      for (std::size_t j = 0; j < m; ++j) {
        pr[j] *= inv_z;
        const double* vj = V.data() + j * width + h * d;
        for (std::size_t c = 0; c < d; ++c) oi[c] += pr[j] * vj[c];
      }
    }
  }
  if (probe) {
    probe->heads = heads;
    probe->queries = n;
    probe->keys = m;
    probe->probabilities = probs;
    probe->max_abs_logit = max_abs_logit;
  }
  return make_result({n, width}, std::move(out), {q, k, v},
                     [n, m, width, d, heads, inv_sqrt_d, probs = std::move(probs)](Node& self) {
                       const auto& G = self.grad;
                       const auto& Q = pval(self, 0);
                       const auto& K = pval(self, 1);
                       const auto& V = pval(self, 2);
                       auto* gq = pgrad(self, 0);
                       auto* gk = pgrad(self, 1);
                       auto* gv = pgrad(self, 2);
                       std::vector<double> dp(m);
                       for (std::size_t h = 0; h < heads; ++h) {
                         for (std::size_t i = 0; i < n; ++i) {
                           const double* pr = probs.data() + (h * n + i) * m;
                           const double* gi = G.data() + i * width + h * d;
                           double rowdot = 0.0;
                           for (std::size_t j = 0; j < m; ++j) {
                             const double* vj = V.data() + j * width + h * d;
                             double s = 0.0;
                             for (std::size_t c = 0; c < d; ++c) s += gi[c] * vj[c];
                             dp[j] = s;
                             rowdot += s * pr[j];
                             if (gv) {
                               double* dst = gv->data() + j * width + h * d;
                               for (std::size_t c = 0; c < d; ++c) dst[c] += pr[j] * gi[c];
                             }
                           }
                           const double* qi = Q.data() + i * width + h * d;
                           for (std::size_t j = 0; j < m; ++j) {
                             const double ds = pr[j] * (dp[j] - rowdot) * inv_sqrt_d;
                             if (ds == 0.0) continue;
                             const double* kj = K.data() + j * width + h * d;
                             if (gq) {
                               double* dst = gq->data() + i * width + h * d;
                               for (std::size_t c = 0; c < d; ++c) dst[c] += ds * kj[c];
                             }
                             if (gk) {
                               double* dst = gk->data() + j * width + h * d;
                               for (std::size_t c = 0; c < d; ++c) dst[c] += ds * qi[c];
                             }
                           }
                         }
                       }
                     });
}

Var conv3d(const Var& x, const Var& weight, const Var& bias) {
  require(x.rank() == 4, "conv3d expects [T,H,W,C] input");
  require(weight.rank() == 5, "conv3d expects [kt,kh,kw,Cin,Cout] weight");
  const std::size_t T = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
  const std::size_t KT = weight.dim(0), KH = weight.dim(1), KW = weight.dim(2);
  require(weight.dim(3) == Ci, "conv3d: input channel mismatch");
  require(KT % 2 == 1 && KH % 2 == 1 && KW % 2 == 1, "conv3d: kernel sizes must be odd");
  const std::size_t Co = weight.dim(4);
  require_rowvec(bias, Co, "conv3d bias");
  const long pt = static_cast<long>(KT / 2), ph = static_cast<long>(KH / 2),
             pw = static_cast<long>(KW / 2);

  // Visits every (output position, kernel tap) pair whose input lies inside the volume.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
          const std::size_t o = ((t * H + h) * W + w);
          for (std::size_t a = 0; a < KT; ++a) {
            const long ti = static_cast<long>(t) + static_cast<long>(a) - pt;
            if (ti < 0 || ti >= static_cast<long>(T)) continue;
            for (std::size_t b = 0; b < KH; ++b) {
              const long hi = static_cast<long>(h) + static_cast<long>(b) - ph;
              if (hi < 0 || hi >= static_cast<long>(H)) continue;
              for (std::size_t c = 0; c < KW; ++c) {
                const long wi = static_cast<long>(w) + static_cast<long>(c) - pw;
                if (wi < 0 || wi >= static_cast<long>(W)) continue;
                const std::size_t in = (static_cast<std::size_t>(ti) * H + static_cast<std::size_t>(hi)) * W +
                                       static_cast<std::size_t>(wi);
                const std::size_t tap = (a * KH + b) * KW + c;
                fn(o, in, tap);
              }
            }
          }
        }
  };

  std::vector<double> out(T * H * W * Co);
  const auto X = x.value(), Wt = weight.value(), B = bias.value();
  for (std::size_t o = 0; o < T * H * W; ++o) std::copy(B.begin(), B.end(), out.begin() + o * Co);
  for_each_tap([&](std::size_t o, std::size_t in, std::size_t tap) {
    double* dst = out.data() + o * Co;
    const double* src = X.data() + in * Ci;
    const double* wt = Wt.data() + tap * Ci * Co;
    for (std::size_t i = 0; i < Ci; ++i) {
      const double xv = src[i];
      if (xv == 0.0) continue;
      const double* wr = wt + i * Co;
      for (std::size_t j = 0; j < Co; ++j) dst[j] += xv * wr[j];
    }
  });

  return make_result({T, H, W, Co}, std::move(out), {x, weight, bias},
                     [=](Node& self) {
                       const auto& G = self.grad;
                       const auto& X = pval(self, 0);
                       const auto& Wt = pval(self, 1);
                       auto* gx = pgrad(self, 0);
                       auto* gw = pgrad(self, 1);
                       auto* gb = pgrad(self, 2);
                       if (gb)
                         for (std::size_t o = 0; o < T * H * W; ++o)
                           for (std::size_t j = 0; j < Co; ++j) (*gb)[j] += G[o * Co + j];
                       if (!gx && !gw) return;
                       for_each_tap([&](std::size_t o, std::size_t in, std::size_t tap) {
                         const double* go = G.data() + o * Co;
                         const double* src = X.data() + in * Ci;
                         const double* wt = Wt.data() + tap * Ci * Co;
                         for (std::size_t i = 0; i < Ci; ++i) {
                           const double* wr = wt + i * Co;
                           if (gx) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < Co; ++j) s += go[j] * wr[j];
                             (*gx)[in * Ci + i] += s;
                           }
                           if (gw) {
                             const double xv = src[i];
                             if (xv == 0.0) continue;
                             double* dw = gw->data() + tap * Ci * Co + i * Co;
                             for (std::size_t j = 0; j < Co; ++j) dw[j] += xv * go[j];
                           }
                         }
                       });
                     });
}

Var avg_pool_spatial2(const Var& x) {
  require(x.rank() == 4, "avg_pool_spatial2 expects [T,H,W,C]");
  const std::size_t T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  require(H % 2 == 0 && W % 2 == 0, "avg_pool_spatial2: odd spatial size");
  const std::size_t Ho = H / 2, Wo = W / 2;
  std::vector<double> out(T * Ho * Wo * C, 0.0);
  const auto X = x.value();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) {
        const double* src = X.data() + ((t * H + h) * W + w) * C;
        double* dst = out.data() + ((t * Ho + h / 2) * Wo + w / 2) * C;
        for (std::size_t c = 0; c < C; ++c) dst[c] += 0.25 * src[c];
      }
  return make_result({T, Ho, Wo, C}, std::move(out), {x}, [=](Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
          const double* src = self.grad.data() + ((t * Ho + h / 2) * Wo + w / 2) * C;
          double* dst = g->data() + ((t * H + h) * W + w) * C;
          for (std::size_t c = 0; c < C; ++c) dst[c] += 0.25 * src[c];
        }
  });
}

Var temporal_group4(const Var& x) {
  require(x.rank() == 4, "temporal_group4 expects [T,H,W,C]");
  const std::size_t T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const int To = latent_frames(static_cast<int>(T));
  const std::size_t frame = H * W * C;
  // Source frame -> (output frame, weight).
  std::vector<std::size_t> target(T);
  std::vector<double> weight(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (T % 4 == 0) {
      target[t] = t / 4;
      weight[t] = 0.25;
    } else if (t == 0) {
      target[t] = 0;
      weight[t] = 1.0;
    } else {
      target[t] = (t - 1) / 4 + 1;
      weight[t] = 0.25;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(To) * frame, 0.0);
  const auto X = x.value();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < frame; ++i) out[target[t] * frame + i] += weight[t] * X[t * frame + i];
  return make_result({static_cast<std::size_t>(To), H, W, C}, std::move(out), {x},
                     [T, frame, target, weight](Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       for (std::size_t t = 0; t < T; ++t)
                         for (std::size_t i = 0; i < frame; ++i)
                           (*g)[t * frame + i] += weight[t] * self.grad[target[t] * frame + i];
                     });
}

Var mean(const Var& x) {
  double s = 0.0;
  for (double v : x.value()) s += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  return make_result({1}, {s * inv}, {x}, [inv](Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    const double gv = self.grad[0] * inv;
    for (double& v : *g) v += gv;
  });
}

Var mse(const Var& pred, const std::vector<double>& target) {
  require(pred.size() == target.size(), "mse: size mismatch");
  const auto P = pred.value();
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = P[i] - target[i];
    s += d * d;
  }
  const double inv = 1.0 / static_cast<double>(target.size());
  return make_result({1}, {s * inv}, {pred}, [inv, target](Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    const auto& P = pval(self, 0);
    const double c = 2.0 * inv * self.grad[0];
    for (std::size_t i = 0; i < target.size(); ++i) (*g)[i] += c * (P[i] - target[i]);
  });
}

}  // namespace mfm::ad
