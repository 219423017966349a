#include "fifuse/reference.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fifuse::reference {

namespace {

double coalition_value(const Regressor& model, const BackgroundSet& bg, std::span<const double> x,
                       std::uint64_t mask) {
    const std::size_t m = x.size();
    if (mask == (std::uint64_t{1} << m) - 1) return model.predict_row(x);
    std::vector<double> z(m);
    double acc = 0.0, total = 0.0;
    for (std::size_t b = 0; b < bg.centers.rows(); ++b) {
        for (std::size_t j = 0; j < m; ++j) z[j] = (mask >> j) & 1U ? x[j] : bg.centers(b, j);
        acc += bg.weights[b] * model.predict_row(z);
        total += bg.weights[b];
    }
    return acc / total;
}

}  // namespace

std::vector<double> predict(const Regressor& model, const Matrix& X) {
    std::vector<double> out;
    out.reserve(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out.push_back(model.predict_row(X.row(i)));
    return out;
}

std::vector<double> permutation_importance(const Regressor& model, const Matrix& X, std::span<const double> y,
                                           std::size_t repeats, std::uint64_t seed) {
    const std::size_t n = X.rows();
    const std::size_t m = X.cols();
    std::vector<double> importance(m, 0.0);
    if (n < 2) return importance;
    auto loss = [&](const Matrix& features) {
        auto pred = predict(model, features);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
        return s / static_cast<double>(n);
    };
    Matrix features = X;
    const double baseline = loss(features);
    for (std::size_t f = 0; f < m; ++f) {
        const auto original = features.column(f);
        double acc = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto perm = permutation_for_repeat(n, seed, r);
            for (std::size_t i = 0; i < n; ++i) features(i, f) = original[perm[i]];
            acc += loss(features) - baseline;
            for (std::size_t i = 0; i < n; ++i) features(i, f) = original[i];
        }
        importance[f] = acc / static_cast<double>(repeats);
    }
    return importance;
}

Matrix exact_shapley_values(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg) {
    const std::size_t m = X_explain.cols();
    if (m >= 63) throw std::invalid_argument("reference::exact_shapley_values: too many features");
    const ShapleyWeights weights(m);
    const std::uint64_t n_masks = std::uint64_t{1} << m;
    Matrix phi(X_explain.rows(), m);
    for (std::size_t r = 0; r < X_explain.rows(); ++r) {
        auto x = X_explain.row(r);
        for (std::size_t i = 0; i < m; ++i) {
            const std::uint64_t bit = std::uint64_t{1} << i;
            double acc = 0.0;
            for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
                if (mask & bit) continue;
                const double with = coalition_value(model, bg, x, mask | bit);
                const double without = coalition_value(model, bg, x, mask);
                acc += weights(static_cast<std::size_t>(std::popcount(mask))) * (with - without);
            }
            phi(r, i) = acc;
        }
    }
    return phi;
}

std::vector<double> global_ig(const Regressor& model, const Matrix& X_explain, const Baseline& b,
                              std::size_t steps) {
    const std::size_t m = X_explain.cols();
    std::vector<double> out(m, 0.0);
    for (std::size_t r = 0; r < X_explain.rows(); ++r) {
        const auto ig = integrated_gradients(model, X_explain.row(r), b, steps);
        for (std::size_t i = 0; i < m; ++i) out[i] += std::abs(ig[i]);
    }
    for (auto& v : out) v /= static_cast<double>(X_explain.rows());
    return out;
}

}  // namespace fifuse::reference
