// SPDX-License-Identifier: Apache-2.0
#include "msgl/attention.hpp"

#include <cmath>
#include <limits>

#include "msgl/errors.hpp"
#include "msgl/ops.hpp"

namespace msgl {

Tensor masked_softmax(const Tensor& scores, const AttentionMask& mask) {
  if (scores.rank() != 2 || scores.dim(0) != scores.dim(1)) {
    throw DimensionError("masked_softmax: expected square scores, got " + shape_to_string(scores.shape()));
  }
  const std::size_t n = scores.dim(0);
  if (mask.length != n) {
    throw DimensionError("masked_softmax: mask of length " + std::to_string(mask.length) + " for " +
                         std::to_string(n) + " positions");
  }
  auto s = scores.data();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (mask.permits(i, j)) mx = std::max(mx, s[i * n + j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask.permits(i, j)) continue;
      out[i * n + j] = std::exp(s[i * n + j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  return make_op_result({n, n}, std::move(out), "masked_softmax", {scores}, [n](detail::Node& self) {
    const double f = debug::backward_fault_active("masked_softmax") ? 1.5 : 1.0;
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.data[i * n + j] * self.grad[i * n + j];
      // Masked entries have probability 0, so their gradient vanishes here.
      for (std::size_t j = 0; j < n; ++j) {
        g[i * n + j] += f * self.data[i * n + j] * (self.grad[i * n + j] - dot);
      }
    }
  });
}

Tensor masked_multihead_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                                  std::size_t heads, const AttentionMask& mask,
                                  const AttentionWeights& w, AttentionTrace* trace) {
  if (query.rank() != 2 || key.rank() != 2 || value.rank() != 2) {
    throw DimensionError("attention inputs must be rank-2 [L x d]");
  }
  const std::size_t d = query.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("model width " + std::to_string(d) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (key.shape() != value.shape() || key.dim(1) != d) {
    throw DimensionError("attention key/value shapes " + shape_to_string(key.shape()) + ", " +
                         shape_to_string(value.shape()) + " do not fit query " + shape_to_string(query.shape()));
  }
  if (query.dim(0) != key.dim(0)) {
    throw DimensionError("self-attention expects equal query and key lengths");
  }
  const std::size_t head_dim = d / heads;
  const double score_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Tensor q = linear(query, w.wq, w.bq);
  Tensor k = linear(key, w.wk, w.bk);
  Tensor v = linear(value, w.wv, w.bv);

  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  if (trace) trace->head_weights.clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    Tensor qh = slice_cols(q, lo, hi);
    Tensor kh = slice_cols(k, lo, hi);
    Tensor vh = slice_cols(v, lo, hi);
    Tensor scores = scale(matmul(qh, transpose(kh)), score_scale);
    Tensor probs = masked_softmax(scores, mask);
    if (trace) trace->head_weights.push_back(probs);
    outputs.push_back(matmul(probs, vh));
  }
  Tensor merged = heads == 1 ? outputs.front() : concat_cols(outputs);
  return linear(merged, w.wo, w.bo);
}

}  // namespace msgl
