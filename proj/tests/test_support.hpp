#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "asymstereo/image.hpp"
#include "asymstereo/rng.hpp"
#include "asymstereo/tensor.hpp"

namespace asymstereo::testing {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.v) v = uniform(rng, lo, hi);
    return t;
}

inline Image random_image(int h, int w, int c, Rng& rng) {
    Image img(h, w, c);
    for (auto& v : img.data.v) v = uniform01(rng);
    return img;
}

/// Central finite difference of a scalar functional with respect to one
/// coordinate of an input tensor.
inline double numeric_partial(const std::function<double(const Tensor&)>& f, Tensor x,
                              std::size_t index, double h = 1e-5) {
    x.v[index] += h;
    const double up = f(x);
    x.v[index] -= 2 * h;
    const double down = f(x);
    return (up - down) / (2 * h);
}

inline double rel_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Scratch directory under the build tree, wiped per test case.
class TempDir {
public:
    explicit TempDir(const std::string& name) : path_(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace asymstereo::testing
