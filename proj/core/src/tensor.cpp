#include "vdlab/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vdlab {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    data_.assign(n, fill);
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (n != data.size())
        throw std::invalid_argument("Tensor::from: shape holds " + std::to_string(n) +
                                    " elements but " + std::to_string(data.size()) + " given");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

std::size_t Tensor::rows() const {
    if (shape_.empty()) throw std::logic_error("rows() on 0-d tensor");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (shape_.size() == 1) return shape_[0];
    if (shape_.size() == 2) return shape_[1];
    throw std::logic_error("cols() on tensor of rank " + std::to_string(shape_.size()));
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

}  // namespace vdlab
