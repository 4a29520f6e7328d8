#ifndef SERVO_NN_TENSOR_HPP
#define SERVO_NN_TENSOR_HPP

#include <cstddef>
#include <numeric>
#include <vector>

#include "servo/errors.hpp"

namespace servo::nn {

// Dense n-dimensional real array, row-major. Carrier for all activations
// and parameters.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_)) {
            throw ShapeMismatch("tensor data length does not match shape");
        }
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(std::vector<std::size_t> new_shape) const {
        Tensor t(std::move(new_shape), data_);
        return t;
    }

    bool operator==(const Tensor& other) const = default;

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        if (shape.empty()) return 0;
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw ShapeMismatch("tensor extents must be positive");
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace servo::nn

#endif
