#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace guidelab {

inline constexpr const char* kVersion = "0.1.0";

using Vec = std::vector<double>;

// Dense row-major matrix, used for sample sets and batch buffers.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    std::span<double> row(int r) { return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }
    Vec row_vec(int r) const { return Vec(row(r).begin(), row(r).end()); }
    void set_row(int r, std::span<const double> v) {
        std::copy(v.begin(), v.end(), data.begin() + static_cast<size_t>(r) * cols);
    }
};

// ---- small vector helpers -------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }
inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline Vec add(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec scale(const Vec& a, double s) {
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
    return r;
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

// ---- error types ----------------------------------------------------------

// Incompatible model/guidance configuration (e.g. CFG on a model without a
// trained null branch).
struct ConfigurationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite or exploding loss.
struct TrainingFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A sampling chain reached a non-finite state.
struct SamplingFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable, truncated, or incompatible checkpoint file.
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace guidelab
