#pragma once

// Loop-level reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mans/tarm.hpp"
#include "support.hpp"

namespace mans::testing {

// Straightforward cross-correlation with zero padding.
inline std::vector<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& k, int stride, int pad) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = k.dim(0), K = k.dim(2);
  const int OH = (H + 2 * pad - K) / stride + 1, OW = (W + 2 * pad - K) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(B) * O * OH * OW, 0.0);
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < O; ++o)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double s = 0.0;
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < K; ++ky)
              for (int kx = 0; kx < K; ++kx) {
                const int y = oy * stride - pad + ky, xx = ox * stride - pad + kx;
                if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
                s += x.raw()[((b * C + c) * H + y) * W + xx] * k.raw()[((o * C + c) * K + ky) * K + kx];
              }
          out[((b * O + o) * OH + oy) * OW + ox] = s;
        }
  return out;
}

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const Tensor<double>& t) {
  Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t r = 0; r < t.dim(0); ++r)
    for (std::size_t c = 0; c < t.dim(1); ++c) m[r][c] = t.raw()[r * t.dim(1) + c];
  return m;
}

// The whole module spelled out with plain loops.
inline Matrix tarm_oracle(const TarmParams<double>& p, const Matrix& x, bool attention = true) {
  const std::size_t T = x.size(), N = x[0].size(), K = p.hidden(), M = p.bottleneck();
  const Matrix w_in = to_matrix(p.fc_in_w), w_out = to_matrix(p.fc_out_w);
  const Matrix w1 = to_matrix(p.w1), w2 = to_matrix(p.w2);

  Matrix xr(T, std::vector<double>(K));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < K; ++k) {
      double s = p.fc_in_b.raw()[k];
      for (std::size_t n = 0; n < N; ++n) s += x[t][n] * w_in[n][k];
      xr[t][k] = s;
    }

  Matrix fwd(T), bwd(T);
  std::vector<double> h(K, 0.0);
  for (std::size_t t = 0; t < T; ++t) fwd[t] = h = gru_oracle(p.bigru.forward, xr[t], h);
  h.assign(K, 0.0);
  for (std::size_t t = T; t-- > 0;) bwd[t] = h = gru_oracle(p.bigru.backward, xr[t], h);

  Matrix fa(T, std::vector<double>(K, 1.0));
  if (attention) {
    std::vector<double> pooled(T);
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += xr[t][k];
      pooled[t] = s / static_cast<double>(K);
    }
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> hidden(M);
      for (std::size_t m = 0; m < M; ++m) {
        double s = p.has_attention_bias() ? p.b1.raw()[m] : 0.0;
        for (std::size_t t = 0; t < T; ++t) s += w1[m][t] * pooled[t];
        hidden[m] = std::max(0.0, s);
      }
      for (std::size_t t = 0; t < T; ++t) {
        double s = p.has_attention_bias() ? p.b2.raw()[t] : 0.0;
        for (std::size_t m = 0; m < M; ++m) s += w2[t][m] * hidden[m];
        fa[t][k] = 1.0 / (1.0 + std::exp(-s));
      }
    }
  }

  Matrix out = x;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n) {
      double s = p.fc_out_b.raw()[n];
      for (std::size_t k = 0; k < K; ++k) s += (fwd[t][k] + bwd[t][k]) * fa[t][k] * w_out[k][n];
      out[t][n] += s;
    }
  return out;
}

}  // namespace mans::testing
