#pragma once
// Small oracles and fixtures shared by the test binaries. Nothing here calls
// into the library's numerics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fifuse/matrix.hpp"
#include "fifuse/regressor.hpp"

namespace testing {

// Gaussian elimination with partial pivoting; A is n x n row-major.
inline std::vector<double> solve(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        }
        std::swap(A[c], A[piv]);
        std::swap(b[c], b[piv]);
        if (A[c][c] == 0.0) throw std::runtime_error("singular system");
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r][c] / A[c][c];
            for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
        x[i] = s / A[i][i];
    }
    return x;
}

// Ordinary least squares through the origin via the normal equations.
inline std::vector<double> least_squares(const fifuse::Matrix& X, std::span<const double> y) {
    const std::size_t p = X.cols();
    std::vector<std::vector<double>> A(p, std::vector<double>(p, 0.0));
    std::vector<double> b(p, 0.0);
    for (std::size_t i = 0; i < X.rows(); ++i) {
        for (std::size_t a = 0; a < p; ++a) {
            b[a] += X(i, a) * y[i];
            for (std::size_t c = 0; c < p; ++c) A[a][c] += X(i, a) * X(i, c);
        }
    }
    return solve(A, b);
}

// Wraps a lambda as a Regressor, optionally with an analytic gradient.
class FnModel final : public fifuse::Regressor {
public:
    using Fn = std::function<double(std::span<const double>)>;
    using Grad = std::function<std::vector<double>(std::span<const double>)>;

    FnModel(std::size_t m, Fn f, Grad g = {}) : m_(m), f_(std::move(f)), g_(std::move(g)) {}
    std::size_t n_features() const override { return m_; }
    double predict_row(std::span<const double> x) const override { return f_(x); }
    bool supports_input_gradient() const override { return static_cast<bool>(g_); }
    std::vector<double> input_gradient(std::span<const double> x) const override {
        if (!g_) return Regressor::input_gradient(x);
        return g_(x);
    }

private:
    std::size_t m_;
    Fn f_;
    Grad g_;
};

inline fifuse::Matrix uniform_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = 0.0,
                                     double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    fifuse::Matrix X(rows, cols);
    for (auto& v : X.data()) v = u(rng);
    return X;
}

// Random simplex row with optional exact zeros.
inline std::vector<double> random_simplex(std::size_t m, std::mt19937_64& rng, double zero_prob = 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(m);
    double s = 0.0;
    for (auto& x : v) {
        x = u(rng) < zero_prob ? 0.0 : u(rng) + 1e-3;
        s += x;
    }
    if (s == 0.0) {
        v[0] = 1.0;
        s = 1.0;
    }
    for (auto& x : v) x /= s;
    return v;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("fifuse-test-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
