#pragma once

// Dense 4-D tensors in (batch, channel, height, width) layout. Network math
// runs on float; the kernels are templated so tests can instantiate double
// copies for high-precision derivative checks.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "polarseg/check.hpp"

namespace polarseg {

struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
               static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }
    bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
           std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

template <typename T>
struct TensorT {
    Shape shape{};
    std::vector<T> data;
    std::vector<T> grad;  // empty unless gradients were requested

    TensorT() = default;
    explicit TensorT(Shape s, T fill = T(0)) : shape(s), data(s.count(), fill) {}
    TensorT(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
        require(data.size() == shape.count(),
                "tensor data length " + std::to_string(data.size()) +
                    " does not match shape " + to_string(shape));
    }

    std::size_t size() const { return data.size(); }

    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x;
    }
    T& at(int n, int c, int y, int x) { return data[index(n, c, y, x)]; }
    const T& at(int n, int c, int y, int x) const { return data[index(n, c, y, x)]; }

    T* plane(int n, int c) { return data.data() + index(n, c, 0, 0); }
    const T* plane(int n, int c) const { return data.data() + index(n, c, 0, 0); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
    }
    bool has_grad() const { return grad.size() == data.size(); }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

using Tensor = TensorT<float>;

}  // namespace polarseg
