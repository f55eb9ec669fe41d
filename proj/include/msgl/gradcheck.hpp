// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "msgl/tensor.hpp"

namespace msgl {

/// Denominator floor for relative errors. Gradients that are exactly zero
/// (e.g. a bias added before a softmax) come back from finite differences
/// as roundoff of order 1e-11; the floor keeps those from reading as
/// large relative errors.
inline constexpr double kRelativeErrorFloor = 1e-6;
inline constexpr double kDefaultFiniteStep = 1e-4;

/// |analytic - numeric| / max(|analytic|, |numeric|, floor)
double gradient_relative_error(double analytic, double numeric, double floor = kRelativeErrorFloor);

/// Fourth-order central difference of f at the current value of `value`:
/// (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / 12h.
double central_difference(const std::function<double()>& f, double& value, double h);

/// Max relative error between backward() and central differences of a
/// scalar function of one tensor.
double check_gradients(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                       double h = kDefaultFiniteStep);

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::vector<ParamGradError> per_param;
  // Split of the checked coordinates by whether max(|analytic|, |numeric|)
  // reaches the floor: plain relative error above it, absolute error below.
  std::size_t entries = 0;
  std::size_t floored_entries = 0;
  double max_rel_error_above_floor = 0.0;
  double max_abs_error_below_floor = 0.0;
};

/// Checks every coordinate of every named leaf. `loss` must rebuild the
/// computation from the current leaf values on each call (deterministically).
GradCheckReport check_gradients(const std::function<Tensor()>& loss, std::span<NamedTensor> params,
                                double h = kDefaultFiniteStep);

}  // namespace msgl
