#pragma once

#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <vector>

#include "weno/util.hpp"

namespace weno {

// Dense row-major array, rank 0..2 in practice (scalars, vectors, matrices).
// T is float for training, double for gradient verification.
template <typename T>
struct Tensor {
    std::vector<long> shape;
    std::vector<T> data;

    Tensor() = default;

    explicit Tensor(std::vector<long> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
    }

    Tensor(std::vector<long> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<long>(data.size()) != numel_of(shape))
            throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
    }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    static long numel_of(const std::vector<long>& s) {
        long n = 1;
        for (long e : s) {
            if (e <= 0) throw std::invalid_argument("non-positive extent in shape " + shape_str(s));
            n *= e;
        }
        return n;
    }

    long numel() const { return static_cast<long>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool is_scalar() const { return numel() == 1; }

    T item() const {
        if (!is_scalar())
            throw std::logic_error("item: tensor of shape " + shape_str(shape) + " is not scalar");
        return data[0];
    }

    long rows() const { return rank() >= 1 ? shape[0] : 1; }
    long cols() const { return rank() == 2 ? shape[1] : 1; }

    T& at(long r, long c) { return data[static_cast<std::size_t>(r * cols() + c)]; }
    T at(long r, long c) const { return data[static_cast<std::size_t>(r * cols() + c)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace weno
