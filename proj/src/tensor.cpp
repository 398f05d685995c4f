#include "hyqal/tensor.hpp"

#include <cmath>
#include <sstream>

namespace hyqal {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
    for (std::size_t d : shape_) {
        if (d == 0) {
            throw ShapeError("Tensor: zero dimension in shape " + shape_to_string(shape_));
        }
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_product(shape_)) {
        throw ShapeError("Tensor: " + std::to_string(data_.size()) + " values for shape " +
                         shape_to_string(shape_));
    }
}

Tensor::Tensor(std::initializer_list<double> values)
    : shape_{values.size()}, data_(values) {}

void Tensor::fill(double v) {
    for (double& x : data_) {
        x = v;
    }
}

void Tensor::add_scaled(const Tensor& other, double scale) {
    if (!same_shape(other)) {
        throw ShapeError("Tensor::add_scaled: shape mismatch " + shape_str() + " vs " +
                         other.shape_str());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += scale * other.data_[i];
    }
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

void Tensor::check_finite(const std::string& what) const {
    if (!all_finite()) {
        throw NumericError(what + ": non-finite value detected");
    }
}

} // namespace hyqal
