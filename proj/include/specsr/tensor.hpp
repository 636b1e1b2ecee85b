#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace specsr {

/// Base class for all errors thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or dimension contract violation. Messages name the offending axis.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid configuration or user input.
struct ConfigError : Error {
    using Error::Error;
};

/// File format / IO problem. Messages carry the byte offset where known.
struct IoError : Error {
    using Error::Error;
};

/// Non-finite values or other numerical breakdown at runtime.
struct NumericalError : Error {
    using Error::Error;
};

/// Dense 4-D array in (n, c, h, w) row-major order. The unit of all
/// network computation; images are carried as n == 1 tensors.
template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4() = default;

    Tensor4(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
        if (n < 0 || c < 0 || h < 0 || w < 0)
            throw ShapeError("Tensor4: negative dimension in (" + dims_str() + ")");
        data.assign(size(), T(0));
    }

    std::size_t size() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }

    std::size_t plane_size() const {
        return static_cast<std::size_t>(h) * w;
    }

    std::size_t idx(int i, int j, int y, int x) const {
        return ((static_cast<std::size_t>(i) * c + j) * h + y) * w + x;
    }

    T& operator()(int i, int j, int y, int x) { return data[idx(i, j, y, x)]; }
    const T& operator()(int i, int j, int y, int x) const { return data[idx(i, j, y, x)]; }

    T* plane(int i, int j) { return data.data() + (static_cast<std::size_t>(i) * c + j) * plane_size(); }
    const T* plane(int i, int j) const { return data.data() + (static_cast<std::size_t>(i) * c + j) * plane_size(); }

    bool same_dims(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string dims_str() const {
        return std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w);
    }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

/// Weights and bias of one valid-convolution layer.
/// Weight layout is (c_out, c_in, kh, kw) row-major; kernel sides are odd.
template <typename T>
struct ConvFilter {
    int c_out = 0, c_in = 0, kh = 0, kw = 0;
    std::vector<T> w;
    std::vector<T> b;

    ConvFilter() = default;

    ConvFilter(int c_out_, int c_in_, int kh_, int kw_)
        : c_out(c_out_), c_in(c_in_), kh(kh_), kw(kw_) {
        validate_dims();
        w.assign(weight_count(), T(0));
        b.assign(static_cast<std::size_t>(c_out), T(0));
    }

    void validate_dims() const {
        if (c_out < 1 || c_in < 1)
            throw ShapeError("ConvFilter: channel counts must be >= 1, got c_out=" +
                             std::to_string(c_out) + " c_in=" + std::to_string(c_in));
        if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0)
            throw ShapeError("ConvFilter: kernel sides must be odd and >= 1, got kh=" +
                             std::to_string(kh) + " kw=" + std::to_string(kw));
    }

    std::size_t weight_count() const {
        return static_cast<std::size_t>(c_out) * c_in * kh * kw;
    }

    std::size_t widx(int co, int ci, int y, int x) const {
        return ((static_cast<std::size_t>(co) * c_in + ci) * kh + y) * kw + x;
    }

    T& wat(int co, int ci, int y, int x) { return w[widx(co, ci, y, x)]; }
    const T& wat(int co, int ci, int y, int x) const { return w[widx(co, ci, y, x)]; }

    std::string dims_str() const {
        return std::to_string(c_out) + "," + std::to_string(c_in) + "," +
               std::to_string(kh) + "," + std::to_string(kw);
    }
};

/// Learnable per-channel slopes of the parametric ReLU; one slope per
/// feature map, unconstrained in sign.
template <typename T>
struct PReluSlopes {
    std::vector<T> a;

    PReluSlopes() = default;
    explicit PReluSlopes(int channels, T init) : a(static_cast<std::size_t>(channels), init) {}
};

}  // namespace specsr
