#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "latentmark/core/check.hpp"

namespace latentmark::nn {

using Shape = std::vector<int64_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

// Dense row-major tensor. NCHW layout for image-like data.
template <class T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), T(0)) {}
    Tensor(Shape shape, T value) : shape_(std::move(shape)), data_(shape_numel(shape_), value) {}

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(T value) { return Tensor(Shape{1}, value); }

    const Shape& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    int64_t dim(size_t i) const { return shape_[i]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 4-d accessor (n, c, h, w); shapes of lower rank index from the left.
    T& at4(int64_t n, int64_t c, int64_t h, int64_t w) {
        return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    const T& at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    T& at3(int64_t c, int64_t h, int64_t w) {
        return data_[static_cast<size_t>((c * shape_[1] + h) * shape_[2] + w)];
    }
    const T& at3(int64_t c, int64_t h, int64_t w) const {
        return data_[static_cast<size_t>((c * shape_[1] + h) * shape_[2] + w)];
    }
    T& at2(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
    const T& at2(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor reshaped(Shape s) const {
        check_shape(shape_numel(s) == numel(),
                    "reshape " + shape_str(shape_) + " -> " + shape_str(s) + ": element count mismatch");
        Tensor out = *this;
        out.shape_ = std::move(s);
        return out;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    void add_(const Tensor& o) {
        check_shape(same_shape(o), "add_: shape mismatch " + shape_str(shape_) + " vs " + shape_str(o.shape_));
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    }

    void scale_(T s) {
        for (auto& v : data_) v *= s;
    }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    T max_abs() const {
        T m = T(0);
        for (T v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

}  // namespace latentmark::nn
