#pragma once

#include <functional>
#include <span>
#include <vector>

#include "kia/autodiff.hpp"

namespace kia {

// Builds a scalar on `tape` from one leaf per parameter tensor.
using MultiParamFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;
using ParamFunction = std::function<Var(Tape& tape, Var theta)>;

// Compares reverse-mode gradients to central differences with step eps.
// Returns max_i |analytic_i - numeric_i| / max(1, |analytic_i|) over every
// coordinate of every parameter. Throws NumericError if any evaluation is
// non-finite.
double grad_check(const MultiParamFunction& f, const std::vector<Tensor>& params, double eps);
double grad_check(const ParamFunction& f, const Tensor& theta, double eps);

}  // namespace kia
