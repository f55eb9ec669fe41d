// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "msgl/rng.hpp"
#include "msgl/tensor.hpp"

namespace msgl {

inline constexpr double kLayerNormEps = 1e-5;

// Linear algebra

/// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
/// x . weight + bias for x [m x in], weight [in x out], bias [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Elementwise

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// x [... x n] + row [n], broadcast over leading axes.
Tensor add_row(const Tensor& x, const Tensor& row);
/// x [... x n] * row [n], broadcast over leading axes.
Tensor mul_row(const Tensor& x, const Tensor& row);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Reductions and normalization

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);
/// Normalizes every slice along the last axis, then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

/// Inverted dropout. Identity when !training or p == 0; p must be in [0, 1).
Tensor dropout(const Tensor& x, double p, bool training, RngStream& rng);

// Shape manipulation

Tensor reshape(const Tensor& x, Shape shape);
/// Rows [begin, end) of a rank-2 tensor.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

}  // namespace msgl
