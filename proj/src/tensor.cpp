#include "blobgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "blobgan/errors.hpp"

namespace blobgan {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto extent : shape) {
        if (extent < 0) throw DomainError("negative extent in shape " + shape_string(shape));
        n *= extent;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
        throw DomainError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_string(shape_));
    }
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, float stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<float> dist(0.0f, stddev);
    for (auto& v : t.data_) v = dist(rng);
    return t;
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, float lo, float hi) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<float> dist(lo, hi);
    for (auto& v : t.data_) v = dist(rng);
    return t;
}

std::int64_t Tensor::dim(int axis) const {
    const int r = rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw DomainError("axis out of range for shape " + shape_string(shape_));
    return shape_[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::offset(std::initializer_list<std::int64_t> index) const {
    if (index.size() != shape_.size()) throw DomainError("index rank mismatch for " + shape_string(shape_));
    std::int64_t off = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i < 0 || i >= shape_[axis]) throw DomainError("index out of range for " + shape_string(shape_));
        off = off * shape_[axis] + i;
        ++axis;
    }
    return off;
}

float& Tensor::at(std::initializer_list<std::int64_t> index) { return data_[static_cast<std::size_t>(offset(index))]; }

float Tensor::at(std::initializer_list<std::int64_t> index) const {
    return data_[static_cast<std::size_t>(offset(index))];
}

Tensor Tensor::reshaped(Shape shape) const& {
    Tensor copy = *this;
    return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
    if (shape_numel(shape) != numel()) {
        throw DomainError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
}

float Tensor::item() const {
    if (numel() != 1) throw DomainError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
}

Tensor Tensor::slice(std::int64_t i) const {
    if (rank() == 0 || i < 0 || i >= shape_[0]) {
        throw DomainError("slice " + std::to_string(i) + " of tensor " + shape_string(shape_));
    }
    Tensor out(Shape(shape_.begin() + 1, shape_.end()));
    std::copy_n(data_.begin() + i * out.numel(), out.numel(), out.data_.begin());
    return out;
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DomainError("shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    float worst = 0.0f;
    for (std::int64_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
    return worst;
}

}  // namespace blobgan
