#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "aero/errors.hpp"

namespace aero {

/// Dense row-major multi-dimensional array. The scalar type is a template
/// parameter: float for training and inference, double for the finite
/// difference test harness.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), data(numel_of(shape), T(0)) {}

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<std::size_t> s, T value) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    }

    static Tensor from(std::vector<std::size_t> s, std::vector<T> values) {
        if (numel_of(s) != values.size()) throw ShapeMismatch("Tensor::from: size mismatch");
        Tensor t;
        t.shape = std::move(s);
        t.data = std::move(values);
        return t;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }

    T& operator()(std::size_t i) { return data[i]; }
    T operator()(std::size_t i) const { return data[i]; }
    T& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    T operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    T& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    T operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

} // namespace aero
