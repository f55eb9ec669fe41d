// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "msgl/tensor.hpp"

namespace msgl {

enum class MaskKind { none, causal };

/// Which key positions each query position may attend to.
struct AttentionMask {
  MaskKind kind = MaskKind::none;
  std::size_t length = 0;

  static AttentionMask causal(std::size_t length) { return {MaskKind::causal, length}; }
  static AttentionMask none(std::size_t length) { return {MaskKind::none, length}; }

  bool permits(std::size_t query, std::size_t key) const {
    return kind == MaskKind::none || key <= query;
  }
};

/// Softmax over the last axis of square scores [L x L]; disallowed entries are
/// treated as -inf and come out as exact zeros.
Tensor masked_softmax(const Tensor& scores, const AttentionMask& mask);

/// Projections of one attention block, every weight [d x d] and bias [d].
struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Per-head probability matrices, filled when requested.
struct AttentionTrace {
  std::vector<Tensor> head_weights;
};

/// Scaled dot-product attention with `heads` heads of width d/heads, scores
/// scaled by 1/sqrt(d/heads), heads concatenated then output-projected.
Tensor masked_multihead_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                                  std::size_t heads, const AttentionMask& mask,
                                  const AttentionWeights& weights, AttentionTrace* trace = nullptr);

}  // namespace msgl
