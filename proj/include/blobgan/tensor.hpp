#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace blobgan {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major float32 array with value semantics.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0f); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0f); }
    static Tensor scalar(float value) { return Tensor(Shape{}, value); }
    static Tensor randn(Shape shape, std::mt19937_64& rng, float stddev = 1.0f);
    static Tensor uniform(Shape shape, std::mt19937_64& rng, float lo, float hi);

    const Shape& shape() const noexcept { return shape_; }
    int rank() const noexcept { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int axis) const;
    std::int64_t numel() const noexcept { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }
    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }
    const std::vector<float>& storage() const noexcept { return data_; }

    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // Multi-index access with bounds checking; intended for tests and small loops.
    float& at(std::initializer_list<std::int64_t> index);
    float at(std::initializer_list<std::int64_t> index) const;

    // Same data, new shape with equal element count.
    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    float item() const;
    // Copy of index i along the leading axis.
    Tensor slice(std::int64_t i) const;
    void fill(float value);

    bool operator==(const Tensor& other) const = default;

private:
    std::int64_t offset(std::initializer_list<std::int64_t> index) const;

    Shape shape_;
    std::vector<float> data_;
};

// Largest absolute elementwise difference; shapes must match.
float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace blobgan
