#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fifuse/matrix.hpp"
#include "fifuse/regressor.hpp"

namespace fifuse {

enum class Method { PI, SHAP, IG };
enum class Split { Train, Test };

std::string_view to_string(Method m);
std::string_view to_string(Split s);
Method parse_method(std::string_view name);
Split parse_split(std::string_view name);

/// One attribution vector over M features from one (model, method) pair.
/// Values are raw: PI error deltas may be negative.
struct ImportanceVector {
    std::vector<double> values;
    std::string model;
    Method method = Method::PI;
    Split split = Split::Train;
    /// PI on a single row, or anything else that could not produce signal.
    bool degenerate = false;
};

/// Weight of a marginal contribution into a coalition of `size` other
/// features: 1 / (M * C(M-1, size)). Over all coalitions missing one
/// feature the weights sum to one.
class ShapleyWeights {
public:
    explicit ShapleyWeights(std::size_t n_features);
    double operator()(std::size_t coalition_size) const { return by_size_.at(coalition_size); }
    std::size_t n_features() const noexcept { return by_size_.size(); }

private:
    std::vector<double> by_size_;
};

struct Baseline {
    std::vector<double> values;
    static Baseline zeros(std::size_t n_features) { return {std::vector<double>(n_features, 0.0)}; }
};

/// Weighted summary of a data set used to marginalize absent features.
struct BackgroundSet {
    Matrix centers;
    std::vector<double> weights;  // strictly positive; sum to the summarized row count

    /// Every row of X with weight 1.
    static BackgroundSet from_rows(const Matrix& X);
};

/// Loss increase (MSE) when one column is shuffled, averaged over `repeats`
/// shuffles. Repeat r uses the same row permutation for every feature, so
/// relabeling features relabels the result exactly. Features run in parallel.
ImportanceVector permutation_importance(const Regressor& model, const Matrix& X, std::span<const double> y,
                                        std::size_t repeats, std::uint64_t seed);

/// Row permutation used by repeat `r` of permutation_importance.
std::vector<std::size_t> permutation_for_repeat(std::size_t n_rows, std::uint64_t seed, std::size_t repeat);

/// Background-weighted mean prediction: the value of the empty coalition.
double background_mean_prediction(const Regressor& model, const BackgroundSet& bg);

inline constexpr std::size_t kDefaultExactLimit = 12;

/// Exact per-instance Shapley values (rows = instances of X_explain). Absent
/// features take background values and predictions are averaged with the
/// background weights; the full coalition is f(x) itself.
Matrix exact_shapley_values(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg,
                            std::size_t exact_limit = kDefaultExactLimit);

/// Global importance: mean |phi| over instances.
ImportanceVector exact_shapley(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg,
                               std::size_t exact_limit = kDefaultExactLimit);

struct SampledShapleyOptions {
    std::size_t n_permutations = 100;
    std::uint64_t seed = 0;
    /// Spread the residual f(x) - E_bg f - sum(phi) over features in proportion to |phi|.
    bool enforce_efficiency = true;
    /// Every second permutation is the reverse of the one before it, which
    /// cancels pairwise interaction noise.
    bool antithetic = true;
};

Matrix sampled_shapley_values(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg,
                              const SampledShapleyOptions& options);
ImportanceVector sampled_shapley(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg,
                                 const SampledShapleyOptions& options);

/// Weighted k-means: k-means++ seeding, Lloyd iterations until centers move
/// less than 1e-6 or 100 iterations. An empty cluster is reseeded at the
/// point farthest from its current center. Weights are cluster sizes.
BackgroundSet kmeans_summarize(const Matrix& X, std::size_t k, std::uint64_t seed);

/// Midpoint-rule integrated gradients along the straight path from b to x.
std::vector<double> integrated_gradients(const Regressor& model, std::span<const double> x, const Baseline& b,
                                         std::size_t steps);

/// Mean |IG| over the rows of X_explain.
ImportanceVector global_ig(const Regressor& model, const Matrix& X_explain, const Baseline& b, std::size_t steps);

/// Mean absolute value of each column.
std::vector<double> mean_abs_columns(const Matrix& local);

/// CSV with columns model,method,split,f0..f{M-1}.
void write_importance_csv(const std::filesystem::path& path, const std::vector<ImportanceVector>& vectors);
std::vector<ImportanceVector> read_importance_csv(const std::filesystem::path& path);

}  // namespace fifuse
