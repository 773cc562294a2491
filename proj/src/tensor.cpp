#include "dybat/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace dybat {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) {
        if (d == 0) {
            throw ShapeError("tensor dims must be positive, got " + Tensor::dims_to_string(dims));
        }
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : dims_(std::move(dims)), values_(checked_product(dims_), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
    if (checked_product(dims_) != values_.size()) {
        throw ShapeError("value count " + std::to_string(values_.size()) +
                         " does not match dims " + dims_to_string(dims_));
    }
}

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::dims_to_string(const std::vector<std::size_t>& dims) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) os << ",";
        os << dims[i];
    }
    os << "]";
    return os.str();
}

Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b) {
    if (!a.same_dims(b)) {
        throw ShapeError("elementwise dims mismatch: " + Tensor::dims_to_string(a.dims()) +
                         " vs " + Tensor::dims_to_string(b.dims()));
    }
    Tensor out(a.dims());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const std::size_t n = a.size();
    switch (op) {
    case EwOp::add:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
        break;
    case EwOp::sub:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
        break;
    case EwOp::mul:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
        break;
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(EwOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(EwOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(EwOp::mul, a, b); }

}  // namespace dybat
