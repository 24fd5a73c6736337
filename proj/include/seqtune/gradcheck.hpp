#pragma once

#include <functional>
#include <vector>

#include "seqtune/tensor.hpp"

namespace seqtune {

using ScalarFn = std::function<double(const Tensor&)>;

// Central-difference gradient estimate: (f(x + eps e_i) - f(x - eps e_i)) / (2 eps)
// per coordinate. f must be deterministic; eps must be positive. This is the
// independent oracle the reverse-mode engine is checked against.
std::vector<double> finite_difference_gradient(const ScalarFn& f, const Tensor& x, double eps);

// Max relative error between two gradients, |a-b| / max(1, |a|, |b|).
double max_rel_err(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace seqtune
