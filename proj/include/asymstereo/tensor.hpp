#pragma once

#include <cassert>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace asymstereo {

/// Dense row-major tensor of doubles. Rank is at most 4 in this codebase:
/// [H,W] maps, [C,H,W] images/features, [D,C,H,W] volumes, [Co,Ci,kh,kw] weights.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        v.assign(count(shape), 0.0);
    }
    Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
        v.assign(count(shape), fill);
    }

    static Tensor scalar(double x) {
        Tensor t({1});
        t.v[0] = x;
        return t;
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    int rank() const { return static_cast<int>(shape.size()); }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool operator==(const Tensor& o) const = default;

    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    // Indexed access; callers are responsible for matching the tensor rank.
    double& at(int y, int x) { return v[idx2(y, x)]; }
    double at(int y, int x) const { return v[idx2(y, x)]; }
    double& at(int c, int y, int x) { return v[idx3(c, y, x)]; }
    double at(int c, int y, int x) const { return v[idx3(c, y, x)]; }
    double& at(int d, int c, int y, int x) { return v[idx4(d, c, y, x)]; }
    double at(int d, int c, int y, int x) const { return v[idx4(d, c, y, x)]; }

    std::size_t idx2(int y, int x) const {
        assert(rank() == 2);
        return static_cast<std::size_t>(y) * shape[1] + x;
    }
    std::size_t idx3(int c, int y, int x) const {
        assert(rank() == 3);
        return (static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x;
    }
    std::size_t idx4(int d, int c, int y, int x) const {
        assert(rank() == 4);
        return ((static_cast<std::size_t>(d) * shape[1] + c) * shape[2] + y) * shape[3] + x;
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace asymstereo
