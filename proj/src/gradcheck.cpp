// SPDX-License-Identifier: Apache-2.0
#include "msgl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "msgl/errors.hpp"

namespace msgl {

double gradient_relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(const std::function<double()>& f, double& value, double h) {
  const double saved = value;
  double sum = 0.0;
  for (auto [offset, weight] : {std::pair{2.0, -1.0}, {1.0, 8.0}, {-1.0, -8.0}, {-2.0, 1.0}}) {
    value = saved + offset * h;
    sum += weight * f();
  }
  value = saved;
  return sum / (12.0 * h);
}

double check_gradients(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor leaf = x.detach();
  leaf.set_requires_grad(true);
  NamedTensor named{"x", leaf};
  return check_gradients([&] { return f(leaf); }, std::span<NamedTensor>(&named, 1), h).max_rel_error;
}

GradCheckReport check_gradients(const std::function<Tensor()>& loss, std::span<NamedTensor> params, double h) {
  for (auto& p : params) {
    if (!p.tensor.is_leaf() || !p.tensor.requires_grad()) {
      throw UsageError("gradient check needs leaf tensors with requires_grad: " + p.name);
    }
    p.tensor.zero_grad();
  }
  Tensor out = loss();
  if (out.numel() != 1) throw UsageError("gradient check needs a scalar function");
  out.backward();

  GradCheckReport report;
  NoGradGuard no_grad;
  for (auto& p : params) {
    ParamGradError entry{p.name};
    const std::vector<double> analytic = p.tensor.grad();
    auto values = p.tensor.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double numeric = central_difference([&] { return loss().item(); }, values[i], h);
      const double err = gradient_relative_error(analytic[i], numeric);
      const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
      ++report.entries;
      if (scale < kRelativeErrorFloor) {
        ++report.floored_entries;
        report.max_abs_error_below_floor =
            std::max(report.max_abs_error_below_floor, std::abs(analytic[i] - numeric));
      } else {
        report.max_rel_error_above_floor = std::max(report.max_rel_error_above_floor, err);
      }
      if (i == 0 || err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic = analytic[i];
        entry.numeric = numeric;
      }
    }
    if (report.worst_param.empty() || entry.max_rel_error > report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_param = p.name;
    }
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace msgl
