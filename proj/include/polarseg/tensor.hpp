#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace polarseg {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major n-d array. `grad` is an optional buffer of identical shape,
// allocated on demand by trainable parameters and backward passes.
template <typename T>
struct TensorT {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;

    TensorT() = default;
    explicit TensorT(Shape s, T fill = T(0)) : shape(std::move(s)) {
        const std::int64_t n = shape_numel(shape);
        if (n < 0) throw std::invalid_argument("tensor: negative dimension in " + shape_str(shape));
        data.assign(static_cast<std::size_t>(n), fill);
    }
    TensorT(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
            throw std::invalid_argument("tensor: " + std::to_string(data.size()) + " values for shape " + shape_str(shape));
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    void alloc_grad() { grad.assign(data.size(), T(0)); }
    void zero_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
        else std::fill(grad.begin(), grad.end(), T(0));
    }
    bool has_grad() const { return grad.size() == data.size(); }

    T& at(std::initializer_list<std::int64_t> idx) { return data[flat(idx)]; }
    const T& at(std::initializer_list<std::int64_t> idx) const { return data[flat(idx)]; }

    std::size_t flat(std::initializer_list<std::int64_t> idx) const {
        std::int64_t off = 0;
        std::size_t k = 0;
        for (auto i : idx) {
            off = off * shape[k] + i;
            ++k;
        }
        return static_cast<std::size_t>(off);
    }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void require_finite(const char* what) const {
        if (!all_finite()) throw std::runtime_error(std::string(what) + ": non-finite value in tensor " + shape_str(shape));
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

inline void check_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <typename T>
double dot(const TensorT<T>& a, const TensorT<T>& b) {
    check_same_shape(a.shape, b.shape, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += static_cast<double>(a.data[i]) * static_cast<double>(b.data[i]);
    return acc;
}

}  // namespace polarseg
