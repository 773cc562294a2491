#pragma once

#include <functional>

#include "dybat/tensor.hpp"

namespace dybat {

/// Central-difference gradient of a scalar function: per coordinate,
/// (f(x + h e_i) - f(x - h e_i)) / (2 h). Used as the independent oracle
/// against analytic gradients everywhere in the test suites.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double h);

}  // namespace dybat
