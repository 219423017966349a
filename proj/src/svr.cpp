#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fifuse/models.hpp"

namespace fifuse {

namespace {

// Subgradient descent runs on centered, unit-variance columns and a
// standardized target. The objective
//   sum_i max(0, |y_i - w.x_i - b| - eps) + ||w||^2 / (2C)
// is divided through by C n scale, so in working units it becomes
//   mean max(0, |r| - eps / scale) + sum_j penalty_j v_j^2 / 2
// with v_j = w_j sd_j / scale and penalty_j = scale / (C n sd_j^2).
struct Problem {
    Matrix Z;                      // standardized columns
    std::vector<double> target;
    std::vector<double> penalty;   // per column
    double eps = 0.0;

    double value(const std::vector<double>& v, double c) const {
        double loss = 0.0;
        for (std::size_t i = 0; i < Z.rows(); ++i) {
            const double r = target[i] - std::inner_product(v.begin(), v.end(), Z.row(i).begin(), c);
            loss += std::max(0.0, std::abs(r) - eps);
        }
        double reg = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) reg += 0.5 * penalty[j] * v[j] * v[j];
        return loss / static_cast<double>(Z.rows()) + reg;
    }
};

}  // namespace

LinearSvr LinearSvr::train(const Matrix& X, std::span<const double> y, const SvrParams& params) {
    const std::size_t n = X.rows();
    const std::size_t p = X.cols();
    const double nd = static_cast<double>(n);
    const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / nd;
    double var = 0.0;
    for (double v : y) var += (v - y_mean) * (v - y_mean);
    const double y_scale = std::sqrt(var / nd);

    std::vector<double> mu(p, 0.0), sd(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) mu[j] += X(i, j) / nd;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) sd[j] += (X(i, j) - mu[j]) * (X(i, j) - mu[j]) / nd;
    }
    for (auto& s : sd) s = std::sqrt(s);

    Problem prob{Matrix(n, p), std::vector<double>(n), std::vector<double>(p, 0.0), params.epsilon / y_scale};
    for (std::size_t i = 0; i < n; ++i) {
        prob.target[i] = (y[i] - y_mean) / y_scale;
        for (std::size_t j = 0; j < p; ++j) prob.Z(i, j) = sd[j] > 0.0 ? (X(i, j) - mu[j]) / sd[j] : 0.0;
    }
    for (std::size_t j = 0; j < p; ++j) {
        if (sd[j] > 0.0) prob.penalty[j] = y_scale / (params.C * nd * sd[j] * sd[j]);
    }

    std::vector<double> v(p, 0.0), grad(p), avg_v(p, 0.0);
    double c = 0.0, avg_c = 0.0;
    std::size_t averaged = 0;
    std::vector<double> best_v = v;
    double best_c = c;
    double best_value = prob.value(v, c);

    for (std::size_t t = 0; t < params.iterations; ++t) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_c = 0.0, loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto row = prob.Z.row(i);
            const double r = prob.target[i] - std::inner_product(v.begin(), v.end(), row.begin(), c);
            const double excess = std::abs(r) - prob.eps;
            if (excess <= 0.0) continue;
            loss += excess;
            const double s = r > 0.0 ? -1.0 : 1.0;
            for (std::size_t j = 0; j < p; ++j) grad[j] += s * row[j];
            grad_c += s;
        }
        double reg = 0.0;
        for (std::size_t j = 0; j < p; ++j) reg += 0.5 * prob.penalty[j] * v[j] * v[j];
        const double value = loss / nd + reg;
        if (value < best_value) {
            best_value = value;
            best_v = v;
            best_c = c;
        }

        const double step = params.step_size / std::sqrt(static_cast<double>(t + 1));
        for (std::size_t j = 0; j < p; ++j) v[j] -= step * (grad[j] / nd + prob.penalty[j] * v[j]);
        c -= step * grad_c / nd;

        if (2 * t >= params.iterations) {
            ++averaged;
            for (std::size_t j = 0; j < p; ++j) avg_v[j] += (v[j] - avg_v[j]) / static_cast<double>(averaged);
            avg_c += (c - avg_c) / static_cast<double>(averaged);
        }
    }
    if (const double last = prob.value(v, c); last < best_value) {
        best_value = last;
        best_v = v;
        best_c = c;
    }
    if (averaged > 0 && prob.value(avg_v, avg_c) < best_value) {
        best_v = avg_v;
        best_c = avg_c;
    }

    std::vector<double> w(p, 0.0);
    double b = y_mean + best_c * y_scale;
    for (std::size_t j = 0; j < p; ++j) {
        if (sd[j] == 0.0) continue;
        w[j] = best_v[j] * y_scale / sd[j];
        b -= w[j] * mu[j];
    }
    return LinearSvr(std::move(w), b);
}

double LinearSvr::predict_row(std::span<const double> x) const {
    return std::inner_product(weights_.begin(), weights_.end(), x.begin(), bias_);
}

nlohmann::json LinearSvr::to_json() const { return {{"weights", weights_}, {"bias", bias_}}; }

LinearSvr LinearSvr::from_json(const nlohmann::json& j) {
    return LinearSvr(j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>());
}

}  // namespace fifuse
