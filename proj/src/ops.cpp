// SPDX-License-Identifier: Apache-2.0
#include "msgl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msgl/errors.hpp"
#include "kernels.hpp"

namespace msgl {
namespace {

double fault_factor(std::string_view op) { return debug::backward_fault_active(op) ? 1.5 : 1.0; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

void require_rank2(const Tensor& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_to_string(x.shape()));
  }
}

void require_last_dim(const Tensor& x, const Tensor& row, const char* op) {
  if (row.numel() != x.shape().back()) {
    throw DimensionError(std::string(op) + ": row of " + std::to_string(row.numel()) +
                         " values does not match trailing extent of " + shape_to_string(x.shape()));
  }
}

bool wants_grad(const detail::Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_to_string(a.shape()) + " . " +
                         shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_op_result({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](detail::Node& self) {
    const double f = fault_factor("matmul");
    const auto& A = self.inputs[0]->data;
    const auto& B = self.inputs[1]->data;
    std::vector<double> dy = self.grad;
    if (f != 1.0) for (double& g : dy) g *= f;
    if (wants_grad(self, 0)) kernels::gemm_nt(dy.data(), B.data(), self.inputs[0]->grad.data(), m, n, k);
    if (wants_grad(self, 1)) kernels::gemm_tn(A.data(), dy.data(), self.inputs[1]->grad.data(), m, k, n);
  });
}

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  auto src = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = src[i * c + j];
  return make_op_result({c, r}, std::move(out), "transpose", {x}, [r, c](detail::Node& self) {
    auto& gx = self.inputs[0]->grad;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[j * r + i];
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank2(x, "linear");
  require_rank2(weight, "linear");
  const std::size_t m = x.dim(0), k = x.dim(1), n = weight.dim(1);
  if (weight.dim(0) != k) {
    throw DimensionError("linear: input " + shape_to_string(x.shape()) + " does not fit weight " +
                         shape_to_string(weight.shape()));
  }
  if (bias.numel() != n) {
    throw DimensionError("linear: bias of " + std::to_string(bias.numel()) + " values for " +
                         std::to_string(n) + " outputs");
  }
  std::vector<double> out(m * n);
  auto b = bias.data();
  for (std::size_t i = 0; i < m; ++i) std::copy(b.begin(), b.end(), out.begin() + i * n);
  kernels::gemm_nn(x.data().data(), weight.data().data(), out.data(), m, k, n);
  return make_op_result({m, n}, std::move(out), "linear", {x, weight, bias}, [m, k, n](detail::Node& self) {
    const double f = fault_factor("linear");
    std::vector<double> dy = self.grad;
    if (f != 1.0) for (double& g : dy) g *= f;
    const auto& X = self.inputs[0]->data;
    const auto& W = self.inputs[1]->data;
    if (wants_grad(self, 0)) kernels::gemm_nt(dy.data(), W.data(), self.inputs[0]->grad.data(), m, n, k);
    if (wants_grad(self, 1)) kernels::gemm_tn(X.data(), dy.data(), self.inputs[1]->grad.data(), m, k, n);
    if (wants_grad(self, 2)) {
      auto& gb = self.inputs[2]->grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += dy[i * n + j];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_op_result(a.shape(), std::move(out), "add", {a, b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants_grad(self, k)) continue;
      auto& g = self.inputs[k]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_op_result(a.shape(), std::move(out), "sub", {a, b}, [](detail::Node& self) {
    if (wants_grad(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_op_result(a.shape(), std::move(out), "mul", {a, b}, [](detail::Node& self) {
    const auto& x = self.inputs[0]->data;
    const auto& y = self.inputs[1]->data;
    if (wants_grad(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i];
    }
    if (wants_grad(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * factor;
  return make_op_result(x.shape(), std::move(out), "scale", {x}, [factor](detail::Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_last_dim(x, row, "add_row");
  const std::size_t n = row.numel();
  std::vector<double> out(x.numel());
  auto v = x.data(), r = row.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] + r[i % n];
  return make_op_result(x.shape(), std::move(out), "add_row", {x, row}, [n](detail::Node& self) {
    if (wants_grad(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
    }
  });
}

Tensor mul_row(const Tensor& x, const Tensor& row) {
  require_last_dim(x, row, "mul_row");
  const std::size_t n = row.numel();
  std::vector<double> out(x.numel());
  auto v = x.data(), r = row.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * r[i % n];
  return make_op_result(x.shape(), std::move(out), "mul_row", {x, row}, [n](detail::Node& self) {
    const double f = fault_factor("mul_row");
    const auto& xv = self.inputs[0]->data;
    const auto& rv = self.inputs[1]->data;
    if (wants_grad(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += f * self.grad[i] * rv[i % n];
    }
    if (wants_grad(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += f * self.grad[i] * xv[i];
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return make_op_result(x.shape(), std::move(out), "relu", {x}, [](detail::Node& self) {
    const auto& xv = self.inputs[0]->data;
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double z = v[i];
    if (z >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-z));
    } else {
      const double e = std::exp(z);
      out[i] = e / (1.0 + e);
    }
  }
  return make_op_result(x.shape(), std::move(out), "sigmoid", {x}, [](detail::Node& self) {
    const double f = fault_factor("sigmoid");
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.data[i];
      g[i] += f * self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_op_result({1}, {total}, "sum", {x}, [](detail::Node& self) {
    auto& g = self.inputs[0]->grad;
    for (double& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

namespace {

struct AxisLayout {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape));
  }
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x.shape(), axis, "softmax");
  std::vector<double> out(x.numel());
  auto v = x.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l.extent; ++k) mx = std::max(mx, v[base + k * l.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < l.extent; ++k) {
        const double e = std::exp(v[base + k * l.inner] - mx);
        out[base + k * l.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < l.extent; ++k) out[base + k * l.inner] /= total;
    }
  }
  return make_op_result(x.shape(), std::move(out), "softmax", {x}, [l](detail::Node& self) {
    const double f = fault_factor("softmax");
    auto& g = self.inputs[0]->grad;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.extent * l.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < l.extent; ++k) {
          const std::size_t i = base + k * l.inner;
          dot += self.data[i] * self.grad[i];
        }
        for (std::size_t k = 0; k < l.extent; ++k) {
          const std::size_t i = base + k * l.inner;
          g[i] += f * self.data[i] * (self.grad[i] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x.shape(), axis, "log_softmax");
  std::vector<double> out(x.numel());
  auto v = x.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l.extent; ++k) mx = std::max(mx, v[base + k * l.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < l.extent; ++k) total += std::exp(v[base + k * l.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t k = 0; k < l.extent; ++k) out[base + k * l.inner] = v[base + k * l.inner] - lse;
    }
  }
  return make_op_result(x.shape(), std::move(out), "log_softmax", {x}, [l](detail::Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.extent * l.inner + in;
        double total = 0.0;
        for (std::size_t k = 0; k < l.extent; ++k) total += self.grad[base + k * l.inner];
        for (std::size_t k = 0; k < l.extent; ++k) {
          const std::size_t i = base + k * l.inner;
          g[i] += self.grad[i] - std::exp(self.data[i]) * total;
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_last_dim(x, gamma, "layer_norm");
  require_last_dim(x, beta, "layer_norm");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  auto v = x.data(), gm = gamma.data(), bt = beta.data();
  std::vector<double> out(x.numel()), xhat(x.numel()), rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * rstd[r];
      xhat[r * n + j] = h;
      out[r * n + j] = h * gm[j] + bt[j];
    }
  }
  return make_op_result(
      x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
      [n, rows, xhat = std::move(xhat), rstd = std::move(rstd)](detail::Node& self) {
        const double f = fault_factor("layer_norm");
        const auto& gm = self.inputs[1]->data;
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* dy = self.grad.data() + r * n;
          const double* h = xhat.data() + r * n;
          if (wants_grad(self, 1)) {
            auto& gg = self.inputs[1]->grad;
            for (std::size_t j = 0; j < n; ++j) gg[j] += dy[j] * h[j];
          }
          if (wants_grad(self, 2)) {
            auto& gb = self.inputs[2]->grad;
            for (std::size_t j = 0; j < n; ++j) gb[j] += dy[j];
          }
          if (wants_grad(self, 0)) {
            double mean_d = 0.0, mean_dh = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              dxhat[j] = dy[j] * gm[j];
              mean_d += dxhat[j];
              mean_dh += dxhat[j] * h[j];
            }
            mean_d /= static_cast<double>(n);
            mean_dh /= static_cast<double>(n);
            auto& gx = self.inputs[0]->grad;
            for (std::size_t j = 0; j < n; ++j) {
              gx[r * n + j] += f * rstd[r] * (dxhat[j] - mean_d - h[j] * mean_dh);
            }
          }
        }
      });
}

Tensor dropout(const Tensor& x, double p, bool training, RngStream& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  std::vector<double> out(x.numel());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.bernoulli(p) ? 0.0 : keep_scale;
    out[i] = v[i] * mask[i];
  }
  return make_op_result(x.shape(), std::move(out), "dropout", {x}, [mask = std::move(mask)](detail::Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " + shape_to_string(shape));
  }
  return make_op_result(std::move(shape), x.to_vector(), "reshape", {x}, [](detail::Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_rows");
  if (begin >= end || end > x.dim(0)) {
    throw DimensionError("slice_rows: bad range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") for " + shape_to_string(x.shape()));
  }
  const std::size_t c = x.dim(1);
  auto v = x.data();
  std::vector<double> out(v.begin() + begin * c, v.begin() + end * c);
  return make_op_result({end - begin, c}, std::move(out), "slice_rows", {x}, [begin, c](detail::Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  if (begin >= end || end > x.dim(1)) {
    throw DimensionError("slice_cols: bad range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") for " + shape_to_string(x.shape()));
  }
  const std::size_t r = x.dim(0), c = x.dim(1), w = end - begin;
  auto v = x.data();
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    std::copy(v.begin() + i * c + begin, v.begin() + i * c + end, out.begin() + i * w);
  return make_op_result({r, w}, std::move(out), "slice_cols", {x}, [r, c, w, begin](detail::Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  for (const auto& p : parts) require_rank2(p, "concat_rows");
  const std::size_t c = parts[0].dim(1);
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.dim(1) != c) throw DimensionError("concat_rows: column extents differ");
    offsets.push_back(rows * c);
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_op_result({rows, c}, std::move(out), "concat_rows", std::move(inputs),
                        [offsets](detail::Node& self) {
                          for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                            if (!wants_grad(self, k)) continue;
                            auto& g = self.inputs[k]->grad;
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offsets[k] + i];
                          }
                        });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  for (const auto& p : parts) require_rank2(p, "concat_cols");
  const std::size_t r = parts[0].dim(0);
  std::size_t cols = 0;
  std::vector<std::size_t> offsets, widths;
  for (const auto& p : parts) {
    if (p.dim(0) != r) throw DimensionError("concat_cols: row extents differ");
    offsets.push_back(cols);
    widths.push_back(p.dim(1));
    cols += p.dim(1);
  }
  std::vector<double> out(r * cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].data();
    for (std::size_t i = 0; i < r; ++i)
      std::copy(v.begin() + i * widths[k], v.begin() + (i + 1) * widths[k], out.begin() + i * cols + offsets[k]);
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_op_result({r, cols}, std::move(out), "concat_cols", std::move(inputs),
                        [r, cols, offsets, widths](detail::Node& self) {
                          for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                            if (!wants_grad(self, k)) continue;
                            auto& g = self.inputs[k]->grad;
                            for (std::size_t i = 0; i < r; ++i)
                              for (std::size_t j = 0; j < widths[k]; ++j)
                                g[i * widths[k] + j] += self.grad[i * cols + offsets[k] + j];
                          }
                        });
}

}  // namespace msgl
