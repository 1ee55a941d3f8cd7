#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "psgan/errors.hpp"

namespace psgan {

/// Dense row-major tensor. Images are stored channel-major as (C, H, W)
/// with float values in [-1, 1]. Templated on the scalar type so the same
/// network code can run in float for training and double for
/// finite-difference verification.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), T(0));
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static Tensor full(std::vector<int> shape, T value) {
        Tensor t(std::move(shape));
        t.fill(value);
        return t;
    }

    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // (c, h, w) accessor for 3-D image tensors.
    T& at(int c, int h, int w) {
        assert(ndim() == 3);
        return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    const T& at(int c, int h, int w) const {
        return const_cast<Tensor*>(this)->at(c, h, w);
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void require_shape(const std::vector<int>& want, const char* what) const {
        if (shape_ != want)
            throw ShapeError(std::string(what) + ": got " + shape_string() +
                             ", want " + shape_string(want));
    }

    std::string shape_string() const { return shape_string(shape_); }

    static std::string shape_string(const std::vector<int>& s) {
        std::string out = "(";
        for (std::size_t i = 0; i < s.size(); ++i)
            out += (i ? "x" : "") + std::to_string(s[i]);
        return out + ")";
    }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw ShapeError("negative dimension in tensor shape");
            n *= static_cast<std::size_t>(d);
        }
        return s.empty() ? 0 : n;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

/// Channel-wise concatenation of two (C,H,W) tensors.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw ShapeError("concat_channels: spatial dims differ: " + a.shape_string() +
                         " vs " + b.shape_string());
    Tensor<T> out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data(), a.data() + a.numel(), out.data());
    std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
    return out;
}

template <typename T>
using TensorPair = std::pair<Tensor<T>, Tensor<T>>;

/// Inverse of concat_channels: splits along the channel axis at c_first.
template <typename T>
TensorPair<T> split_channels(const Tensor<T>& x, int c_first) {
    Tensor<T> a({c_first, x.dim(1), x.dim(2)});
    Tensor<T> b({x.dim(0) - c_first, x.dim(1), x.dim(2)});
    std::copy(x.data(), x.data() + a.numel(), a.data());
    std::copy(x.data() + a.numel(), x.data() + x.numel(), b.data());
    return {std::move(a), std::move(b)};
}

using Tensorf = Tensor<float>;

}  // namespace psgan
