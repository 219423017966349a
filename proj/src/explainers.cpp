#include "fifuse/explainers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fifuse/csv.hpp"
#include "fifuse/random.hpp"

namespace fifuse {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::PI: return "pi";
        case Method::SHAP: return "shap";
        case Method::IG: return "ig";
    }
    return "?";
}

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Method parse_method(std::string_view name) {
    if (name == "pi") return Method::PI;
    if (name == "shap") return Method::SHAP;
    if (name == "ig") return Method::IG;
    throw std::invalid_argument("unknown attribution method '" + std::string(name) + "'");
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + std::string(name) + "' (expected train or test)");
}

ShapleyWeights::ShapleyWeights(std::size_t n_features) {
    if (n_features == 0) throw std::invalid_argument("ShapleyWeights: no features");
    by_size_.resize(n_features);
    // 1 / (M * C(M-1, k)), with C built multiplicatively to stay exact for small M
    double binom = 1.0;
    const double m = static_cast<double>(n_features);
    for (std::size_t k = 0; k < n_features; ++k) {
        by_size_[k] = 1.0 / (m * binom);
        binom = binom * static_cast<double>(n_features - 1 - k) / static_cast<double>(k + 1);
    }
}

BackgroundSet BackgroundSet::from_rows(const Matrix& X) { return {X, std::vector<double>(X.rows(), 1.0)}; }

namespace {

void check_background(const Regressor& model, const BackgroundSet& bg) {
    if (bg.centers.rows() == 0 || bg.centers.rows() != bg.weights.size()) {
        throw std::invalid_argument("background set is empty or its weights do not match its centers");
    }
    if (bg.centers.cols() != model.n_features()) throw std::invalid_argument("background width mismatch");
    for (double w : bg.weights) {
        if (!(w > 0.0)) throw std::invalid_argument("background weights must be positive");
    }
}

double mse(std::span<const double> pred, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
    return s / static_cast<double>(y.size());
}

// Value of the coalition `mask` at x: background-weighted mean of f with the
// masked-in features taken from x.
class CoalitionValue {
public:
    CoalitionValue(const Regressor& model, const BackgroundSet& bg, std::span<const double> x)
        : model_(model), bg_(bg), x_(x), hybrid_(x.size()) {
        total_weight_ = std::accumulate(bg.weights.begin(), bg.weights.end(), 0.0);
        fx_ = model.predict_row(x);
    }

    double fx() const noexcept { return fx_; }

    double operator()(std::uint64_t mask) {
        const std::size_t m = x_.size();
        if (m < 64 && mask == (std::uint64_t{1} << m) - 1) return fx_;
        double acc = 0.0;
        for (std::size_t b = 0; b < bg_.centers.rows(); ++b) {
            auto c = bg_.centers.row(b);
            for (std::size_t j = 0; j < m; ++j) hybrid_[j] = (mask >> j) & 1U ? x_[j] : c[j];
            acc += bg_.weights[b] * model_.predict_row(hybrid_);
        }
        return acc / total_weight_;
    }

private:
    const Regressor& model_;
    const BackgroundSet& bg_;
    std::span<const double> x_;
    std::vector<double> hybrid_;
    double total_weight_ = 0.0;
    double fx_ = 0.0;
};

}  // namespace

std::vector<std::size_t> permutation_for_repeat(std::size_t n_rows, std::uint64_t seed, std::size_t repeat) {
    std::vector<std::size_t> perm(n_rows);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, repeat));
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

ImportanceVector permutation_importance(const Regressor& model, const Matrix& X, std::span<const double> y,
                                        std::size_t repeats, std::uint64_t seed) {
    if (repeats == 0) throw std::invalid_argument("permutation_importance: repeats must be >= 1");
    if (X.rows() != y.size() || X.rows() == 0) {
        throw std::invalid_argument("permutation_importance: X and y must be non-empty and agree in length");
    }
    const std::size_t n = X.rows();
    const std::size_t m = X.cols();
    ImportanceVector out;
    out.method = Method::PI;
    out.model = model.name();
    out.values.assign(m, 0.0);
    if (n == 1) {
        out.degenerate = true;
        return out;
    }

    const double baseline = mse(model.predict(X), y);
    std::vector<std::vector<std::size_t>> perms(repeats);
    for (std::size_t r = 0; r < repeats; ++r) perms[r] = permutation_for_repeat(n, seed, r);

    const auto features = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel
    {
        Matrix work = X;
        std::vector<double> pred(n);
#pragma omp for schedule(dynamic)
        for (std::ptrdiff_t fi = 0; fi < features; ++fi) {
            const auto f = static_cast<std::size_t>(fi);
            double acc = 0.0;
            for (std::size_t r = 0; r < repeats; ++r) {
                for (std::size_t i = 0; i < n; ++i) work(i, f) = X(perms[r][i], f);
                for (std::size_t i = 0; i < n; ++i) pred[i] = model.predict_row(work.row(i));
                acc += mse(pred, y) - baseline;
            }
            for (std::size_t i = 0; i < n; ++i) work(i, f) = X(i, f);
            out.values[f] = acc / static_cast<double>(repeats);
        }
    }
    return out;
}

double background_mean_prediction(const Regressor& model, const BackgroundSet& bg) {
    check_background(model, bg);
    double acc = 0.0, total = 0.0;
    for (std::size_t b = 0; b < bg.centers.rows(); ++b) {
        acc += bg.weights[b] * model.predict_row(bg.centers.row(b));
        total += bg.weights[b];
    }
    return acc / total;
}

Matrix exact_shapley_values(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg,
                            std::size_t exact_limit) {
    check_background(model, bg);
    const std::size_t m = X_explain.cols();
    if (m != model.n_features()) throw std::invalid_argument("exact_shapley: width mismatch");
    if (m > exact_limit || m >= 63) {
        throw std::invalid_argument("exact_shapley: " + std::to_string(m) + " features exceeds the exact limit of " +
                                    std::to_string(exact_limit) + "; use sampled_shapley");
    }
    const ShapleyWeights weights(m);
    const std::uint64_t n_masks = std::uint64_t{1} << m;
    Matrix phi(X_explain.rows(), m);
    const auto rows = static_cast<std::ptrdiff_t>(X_explain.rows());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ri = 0; ri < rows; ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        CoalitionValue value(model, bg, X_explain.row(r));
        std::vector<double> v(n_masks);
        for (std::uint64_t mask = 0; mask < n_masks; ++mask) v[mask] = value(mask);
        auto out = phi.row(r);
        for (std::size_t i = 0; i < m; ++i) {
            const std::uint64_t bit = std::uint64_t{1} << i;
            double acc = 0.0;
            for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
                if (mask & bit) continue;
                const auto size = static_cast<std::size_t>(std::popcount(mask));
                acc += weights(size) * (v[mask | bit] - v[mask]);
            }
            out[i] = acc;
        }
    }
    return phi;
}

std::vector<double> mean_abs_columns(const Matrix& local) {
    std::vector<double> out(local.cols(), 0.0);
    if (local.rows() == 0) return out;
    for (std::size_t r = 0; r < local.rows(); ++r) {
        auto row = local.row(r);
        for (std::size_t c = 0; c < local.cols(); ++c) out[c] += std::abs(row[c]);
    }
    for (auto& v : out) v /= static_cast<double>(local.rows());
    return out;
}

ImportanceVector exact_shapley(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg,
                               std::size_t exact_limit) {
    ImportanceVector out;
    out.method = Method::SHAP;
    out.model = model.name();
    out.values = mean_abs_columns(exact_shapley_values(model, X_explain, bg, exact_limit));
    return out;
}

Matrix sampled_shapley_values(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg,
                              const SampledShapleyOptions& options) {
    check_background(model, bg);
    if (options.n_permutations == 0) throw std::invalid_argument("sampled_shapley: n_permutations must be >= 1");
    const std::size_t m = X_explain.cols();
    if (m != model.n_features()) throw std::invalid_argument("sampled_shapley: width mismatch");
    const std::size_t k = bg.centers.rows();
    const double total_weight = std::accumulate(bg.weights.begin(), bg.weights.end(), 0.0);
    const double empty_value = background_mean_prediction(model, bg);
    Matrix phi(X_explain.rows(), m);
    const auto rows = static_cast<std::ptrdiff_t>(X_explain.rows());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ri = 0; ri < rows; ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        auto x = X_explain.row(r);
        const double fx = model.predict_row(x);
        Rng rng(derive_seed(options.seed, r));
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        Matrix hybrids(k, m);
        std::vector<double> acc(m, 0.0);
        for (std::size_t p = 0; p < options.n_permutations; ++p) {
            if (options.antithetic && p % 2 == 1) {
                std::reverse(order.begin(), order.end());
            } else {
                std::shuffle(order.begin(), order.end(), rng);
            }
            hybrids = bg.centers;
            double prev = empty_value;
            for (std::size_t step = 0; step < m; ++step) {
                const std::size_t j = order[step];
                double cur;
                if (step + 1 == m) {
                    cur = fx;
                } else {
                    double s = 0.0;
                    for (std::size_t b = 0; b < k; ++b) {
                        hybrids(b, j) = x[j];
                        s += bg.weights[b] * model.predict_row(hybrids.row(b));
                    }
                    cur = s / total_weight;
                }
                acc[j] += cur - prev;
                prev = cur;
            }
        }
        auto out = phi.row(r);
        for (std::size_t j = 0; j < m; ++j) out[j] = acc[j] / static_cast<double>(options.n_permutations);

        if (options.enforce_efficiency) {
            double sum = 0.0, abs_sum = 0.0;
            for (double v : out) {
                sum += v;
                abs_sum += std::abs(v);
            }
            const double residual = fx - empty_value - sum;
            for (auto& v : out) {
                v += abs_sum > 0.0 ? residual * std::abs(v) / abs_sum : residual / static_cast<double>(m);
            }
        }
    }
    return phi;
}

ImportanceVector sampled_shapley(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg,
                                 const SampledShapleyOptions& options) {
    ImportanceVector out;
    out.method = Method::SHAP;
    out.model = model.name();
    out.values = mean_abs_columns(sampled_shapley_values(model, X_explain, bg, options));
    return out;
}

std::vector<double> integrated_gradients(const Regressor& model, std::span<const double> x, const Baseline& b,
                                         std::size_t steps) {
    if (!model.supports_input_gradient()) {
        throw std::logic_error("integrated_gradients: " + model.name() + " is not differentiable");
    }
    if (steps == 0) throw std::invalid_argument("integrated_gradients: steps must be >= 1");
    const std::size_t m = x.size();
    if (b.values.size() != m) throw std::invalid_argument("integrated_gradients: baseline width mismatch");
    std::vector<double> point(m), acc(m, 0.0);
    for (std::size_t t = 1; t <= steps; ++t) {
        const double alpha = (static_cast<double>(t) - 0.5) / static_cast<double>(steps);
        for (std::size_t i = 0; i < m; ++i) point[i] = b.values[i] + alpha * (x[i] - b.values[i]);
        const auto g = model.input_gradient(point);
        for (std::size_t i = 0; i < m; ++i) acc[i] += g[i];
    }
    for (std::size_t i = 0; i < m; ++i) acc[i] = (x[i] - b.values[i]) * acc[i] / static_cast<double>(steps);
    return acc;
}

ImportanceVector global_ig(const Regressor& model, const Matrix& X_explain, const Baseline& b, std::size_t steps) {
    if (!model.supports_input_gradient()) {
        throw std::logic_error("global_ig: " + model.name() + " is not differentiable");
    }
    Matrix local(X_explain.rows(), X_explain.cols());
    const auto rows = static_cast<std::ptrdiff_t>(X_explain.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ri = 0; ri < rows; ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        auto ig = integrated_gradients(model, X_explain.row(r), b, steps);
        std::copy(ig.begin(), ig.end(), local.row(r).begin());
    }
    ImportanceVector out;
    out.method = Method::IG;
    out.model = model.name();
    out.values = mean_abs_columns(local);
    return out;
}

void write_importance_csv(const std::filesystem::path& path, const std::vector<ImportanceVector>& vectors) {
    if (vectors.empty()) throw std::invalid_argument("write_importance_csv: nothing to write");
    const std::size_t m = vectors.front().values.size();
    csv::Table t;
    t.header = {"model", "method", "split"};
    for (std::size_t c = 0; c < m; ++c) t.header.push_back("f" + std::to_string(c));
    for (const auto& v : vectors) {
        if (v.values.size() != m) throw std::invalid_argument("write_importance_csv: vectors differ in length");
        std::vector<std::string> row{v.model, std::string(to_string(v.method)), std::string(to_string(v.split))};
        for (double x : v.values) row.push_back(csv::format_double(x));
        t.rows.push_back(std::move(row));
    }
    csv::write(path, t);
}

std::vector<ImportanceVector> read_importance_csv(const std::filesystem::path& path) {
    auto t = csv::read(path);
    if (t.header.size() < 4 || t.header[0] != "model" || t.header[1] != "method" || t.header[2] != "split") {
        throw std::runtime_error(path.string() + ": expected columns model,method,split,f0,...");
    }
    std::vector<ImportanceVector> out;
    for (const auto& row : t.rows) {
        ImportanceVector v;
        v.model = row[0];
        v.method = parse_method(row[1]);
        v.split = parse_split(row[2]);
        for (std::size_t c = 3; c < row.size(); ++c) v.values.push_back(csv::parse_double(row[c]));
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace fifuse
