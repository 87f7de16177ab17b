#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "mvc/errors.hpp"

namespace mvc {

// Dense row-major tensor. Latents and images use rank 3 (channels, height,
// width); weights use whatever rank the layer needs. Templated on the scalar
// so the same kernels can run at float (production) or double (oracles).
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> v;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)), v(numel_of(shape), T(0)) {}
    TensorT(std::vector<int> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        require(v.size() == numel_of(shape), ErrorKind::shape, "tensor data does not match shape");
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            require(d > 0, ErrorKind::shape, "tensor dimensions must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return v.size(); }
    int rank() const { return static_cast<int>(shape.size()); }

    // Rank-3 accessors.
    int c() const { return shape.at(0); }
    int h() const { return shape.at(1); }
    int w() const { return shape.at(2); }
    T& at(int ci, int yi, int xi) { return v[(static_cast<std::size_t>(ci) * h() + yi) * w() + xi]; }
    const T& at(int ci, int yi, int xi) const {
        return v[(static_cast<std::size_t>(ci) * h() + yi) * w() + xi];
    }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape);
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

using Tensor = TensorT<float>;

// Images live in [0,1]; latents are unconstrained. Both are rank-3 tensors,
// the aliases mark intent at interfaces.
using ImageTensor = Tensor;
using LatentTensor = Tensor;

inline std::string shape_string(const std::vector<int>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const std::string& what) {
    require(a.shape == b.shape, ErrorKind::shape,
            what + ": " + shape_string(a.shape) + " vs " + shape_string(b.shape));
}

}  // namespace mvc
