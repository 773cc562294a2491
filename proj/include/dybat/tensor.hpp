#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dybat/error.hpp"

namespace dybat {

/// Dense row-major tensor of 64-bit floats. Immutable from the caller's
/// perspective once built; all public operations return new tensors.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
    Tensor(std::vector<std::size_t> dims, std::vector<double> values);

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t size() const { return values_.size(); }
    std::size_t dim(std::size_t axis) const { return dims_.at(axis); }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    const double* data() const { return values_.data(); }
    double* data() { return values_.data(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    // Row-major flat offsets for the ranks used in this project.
    std::size_t offset3(std::size_t a, std::size_t b, std::size_t c) const {
        return (a * dims_[1] + b) * dims_[2] + c;
    }
    std::size_t offset4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return ((a * dims_[1] + b) * dims_[2] + c) * dims_[3] + d;
    }

    bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

    /// True when every value is finite.
    bool all_finite() const;

    static std::string dims_to_string(const std::vector<std::size_t>& dims);

private:
    std::vector<std::size_t> dims_;
    std::vector<double> values_;
};

enum class EwOp { add, sub, mul };

/// Elementwise combine of two tensors of identical dims.
Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

}  // namespace dybat
