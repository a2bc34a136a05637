#include "lytnet/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "lytnet/error.hpp"

namespace lytnet {

namespace {

void check_shape(const Shape& shape) {
    if (shape.channels < 1 || shape.height < 1 || shape.width < 1) {
        throw ValidationError("tensor dimensions must be >= 1, got " + to_string(shape));
    }
}

}  // namespace

std::string to_string(const Shape& shape) {
    return "(" + std::to_string(shape.channels) + "," + std::to_string(shape.height) + "," +
           std::to_string(shape.width) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
    check_shape(shape_);
    data_.assign(shape_.size(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_.size()) {
        throw ValidationError("tensor data length " + std::to_string(data_.size()) +
                              " does not match shape " + to_string(shape_));
    }
}

Tensor Tensor::vector(std::vector<float> values) {
    const int n = static_cast<int>(values.size());
    return Tensor(Shape{n, 1, 1}, std::move(values));
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace lytnet
