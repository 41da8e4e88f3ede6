#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vdlab {

// Dense row-major tensor of 64-bit floats.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data);
    static Tensor scalar(double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Named leaf storage shared by the model and the optimizer. Gradients
// accumulate here when a graph's backward pass reaches the leaf.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor v, bool t = true)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(t) {}

    void zero_grad() { grad.fill(0.0); }
};

}  // namespace vdlab
