#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sketchlab {

// Dense row-major tensor of doubles. Rank is 1 (vector) or 2 (matrix) for
// everything in this project.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(static_cast<std::size_t>(count(shape)), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
        if (count(shape) != static_cast<long long>(v.size())) throw std::invalid_argument("tensor: shape/data size mismatch");
    }

    static long long count(const std::vector<int>& s) {
        long long n = 1;
        for (int d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor vec(std::vector<double> data) {
        int n = static_cast<int>(data.size());
        return Tensor({n}, std::move(data));
    }

    int size() const { return static_cast<int>(v.size()); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
    double& at(int r, int c) { return v[static_cast<std::size_t>(r * cols() + c)]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r * cols() + c)]; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline std::string shape_str(const Tensor& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) s += (i ? "x" : "") + std::to_string(t.shape[i]);
    return s + "]";
}

// Shared arithmetic kernels. Both the tape ops and the plain (inference)
// forward passes go through these, so the two paths agree bit for bit.
namespace kernel {

// y = W x, W is {m, n}, x and y are raw length-n / length-m buffers.
inline void matvec(const Tensor& W, const double* x, double* y) {
    const int m = W.shape[0], n = W.shape[1];
    const double* w = W.v.data();
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* row = w + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

// y += W^T g  (accumulates the input-side gradient of matvec)
inline void matvec_add_wt(const Tensor& W, const double* g, double* y) {
    const int m = W.shape[0], n = W.shape[1];
    const double* w = W.v.data();
    for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        const double* row = w + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) y[j] += gi * row[j];
    }
}

// dW += g x^T (outer product, the weight-side gradient of matvec)
inline void add_outer(double* dW, const double* g, int m, const double* x, int n) {
    for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        double* row = dW + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) row[j] += gi * x[j];
    }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Numerically stable softmax over a length-n buffer.
inline void softmax(const double* x, double* y, int n) {
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
    }
    for (int i = 0; i < n; ++i) y[i] /= sum;
}

}  // namespace kernel

}  // namespace sketchlab
