#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fifuse/explainers.hpp"
#include "fifuse/matrix.hpp"

namespace fifuse {

struct SourceLabel {
    std::string model;
    Method method = Method::PI;
    Split split = Split::Train;
};

/// N sources x M features; every row non-negative and summing to one.
struct ImportanceMatrix {
    Matrix values;
    std::vector<SourceLabel> labels;
    /// Row was all zeros and was replaced by the uniform vector.
    std::vector<bool> degenerate;

    std::size_t n_sources() const noexcept { return values.rows(); }
    std::size_t n_features() const noexcept { return values.cols(); }
};

ImportanceMatrix build_importance_matrix(const std::vector<ImportanceVector>& vectors);
/// Unlabeled variant for raw rows read from a plain numeric matrix.
ImportanceMatrix build_importance_matrix(const Matrix& raw_rows);

/// |v| / sum|v|; the uniform vector when v is all zeros (flag set).
std::vector<double> l1_normalize(std::span<const double> v, bool* was_zero = nullptr);

enum class FusionStrategy { Mean, Median, Mode, BoxWhiskers, TauTest, MajorityVote, RateKendall, RateSpearman };

inline constexpr FusionStrategy kAllStrategies[] = {
    FusionStrategy::Mean,    FusionStrategy::Median,       FusionStrategy::Mode,
    FusionStrategy::BoxWhiskers, FusionStrategy::TauTest,  FusionStrategy::MajorityVote,
    FusionStrategy::RateKendall, FusionStrategy::RateSpearman};

/// Kebab-case name: mean, median, mode, box-whiskers, tau-test, majority-vote,
/// rate-kendall, rate-spearman.
std::string_view to_string(FusionStrategy s);
FusionStrategy parse_strategy(std::string_view name);

struct FusionResult {
    FusionStrategy strategy = FusionStrategy::Mean;
    std::vector<double> final;
    /// Rows that contributed to at least one fused column.
    std::vector<std::size_t> retained_sources;
    /// RATE only: entry (i, j) true when rows i and j are significantly, positively rank-correlated.
    std::optional<std::vector<std::vector<bool>>> truth_table;
    /// RATE found no surviving row and averaged everything instead.
    bool fallback = false;
    /// Column-wise fused values summed to zero; final is uniform.
    bool degenerate = false;

    nlohmann::json to_json() const;
};

struct FusionOptions {
    double alpha = 0.05;       // tau test and RATE significance level
    double bin_width = 0.05;   // mode histogram
};

FusionResult fuse_mean(const ImportanceMatrix& V);
FusionResult fuse_median(const ImportanceMatrix& V);
FusionResult fuse_mode(const ImportanceMatrix& V, double bin_width = 0.05);
FusionResult fuse_box_whiskers(const ImportanceMatrix& V);
FusionResult fuse_tau_test(const ImportanceMatrix& V, double alpha = 0.05);
FusionResult fuse_majority_vote(const ImportanceMatrix& V);

enum class RankCorrelation { Kendall, Spearman };
FusionResult fuse_rate(const ImportanceMatrix& V, RankCorrelation corr, double alpha = 0.05);

FusionResult fuse(const ImportanceMatrix& V, FusionStrategy strategy, const FusionOptions& options = {});

/// Column value after Modified Thompson tau rejection; `kept` marks survivors.
double tau_test_column(std::span<const double> values, double alpha, std::vector<bool>& kept);
/// Mean of the values inside the Tukey fences; `kept` marks survivors.
double box_whiskers_column(std::span<const double> values, std::vector<bool>& kept);
/// Mean of the members of the modal bin; `kept` marks them.
double mode_column(std::span<const double> values, double bin_width, std::vector<bool>& kept);

}  // namespace fifuse
