#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "radseq/error.hpp"

namespace radseq {

using Shape = std::vector<std::size_t>;

/// "3x128x128" style rendering for error messages.
std::string shape_string(const Shape& shape);

std::size_t shape_volume(const Shape& shape);

/// Dense row-major N-dimensional array. The last index varies fastest;
/// image tensors are channel-major CxHxW. Values returned from the numeric
/// kernels stay finite given finite inputs.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    /// Zero-filled tensor. Every extent must be positive.
    explicit TensorT(Shape shape) : shape_(std::move(shape)) {
        data_.assign(checked_volume(shape_), T(0));
    }

    TensorT(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_volume(shape_)) {
            throw DimensionError("tensor: " + std::to_string(data_.size()) +
                                 " values do not fill shape " + shape_string(shape_));
        }
    }

    static TensorT full(Shape shape, T value) {
        TensorT t(std::move(shape));
        for (T& v : t.data_) v = value;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    template <typename... Ix>
    T& operator()(Ix... ix) {
        return data_[flat_index({static_cast<std::size_t>(ix)...})];
    }
    template <typename... Ix>
    const T& operator()(Ix... ix) const {
        return data_[flat_index({static_cast<std::size_t>(ix)...})];
    }

    /// Same data, new shape; volumes must agree.
    TensorT reshaped(Shape new_shape) const {
        if (shape_volume(new_shape) != data_.size()) {
            throw DimensionError("reshape: " + shape_string(shape_) + " -> " +
                                 shape_string(new_shape) + " changes the element count");
        }
        return TensorT(std::move(new_shape), data_);
    }

    template <typename U>
    TensorT<U> cast() const {
        std::vector<U> converted(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) converted[i] = static_cast<U>(data_[i]);
        return TensorT<U>(shape_, std::move(converted));
    }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const TensorT&) const = default;

private:
    std::size_t flat_index(std::initializer_list<std::size_t> ix) const {
        if (ix.size() != shape_.size()) {
            throw DimensionError("index rank " + std::to_string(ix.size()) +
                                 " does not match tensor rank " + std::to_string(shape_.size()));
        }
        std::size_t flat = 0;
        std::size_t axis = 0;
        for (std::size_t i : ix) {
            if (i >= shape_[axis]) {
                throw DimensionError("index " + std::to_string(i) + " out of bounds for axis " +
                                     std::to_string(axis) + " of " + shape_string(shape_));
            }
            flat = flat * shape_[axis] + i;
            ++axis;
        }
        return flat;
    }

    static std::size_t checked_volume(const Shape& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw DimensionError("tensor shape " + shape_string(shape) + " has a zero extent");
            n *= e;
        }
        return n;
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace radseq
