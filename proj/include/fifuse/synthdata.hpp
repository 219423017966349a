#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fifuse/matrix.hpp"

namespace fifuse {

struct DataConfig {
    std::size_t n_samples = 500;
    std::size_t n_features = 20;
    double informative_pct = 100.0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;

    /// round(n_features * informative_pct / 100), half away from zero.
    std::size_t informative_count() const;
    /// Throws std::invalid_argument when the config cannot produce a dataset.
    void validate() const;
};

/// A regression dataset whose generating coefficients are known.
///
/// `X` holds the min-max scaled features (each column in [0,1]); `X_raw`
/// keeps the pre-scaling design so the generator can be checked against an
/// exact linear refit. Rows are already shuffled: rows [0, split_index) are
/// the training split, the rest the test split.
struct Dataset {
    Matrix X;
    Matrix X_raw;
    std::vector<double> y;
    std::vector<double> true_coefficients;
    DataConfig config;
    std::size_t split_index = 0;

    std::size_t n_samples() const noexcept { return X.rows(); }
    std::size_t n_features() const noexcept { return X.cols(); }
};

/// Non-negative importance summing to one; zero exactly on non-informative features.
struct GroundTruthImportance {
    std::vector<double> values;
};

struct SplitView {
    Matrix X;
    std::vector<double> y;
};

Dataset generate_dataset(const DataConfig& config);

GroundTruthImportance ground_truth_importance(const Dataset& d);
GroundTruthImportance ground_truth_importance(const std::vector<double>& coefficients);

/// Number of training rows for n samples: floor(n * train_fraction).
std::size_t train_row_count(std::size_t n_samples, double train_fraction);

std::pair<SplitView, SplitView> split(const Dataset& d);

/// Writes `path` as CSV (f0..f{M-1},y) and a JSON sidecar next to it with the
/// config, split index and true coefficients.
void write_dataset(const Dataset& d, const std::filesystem::path& csv_path);
/// Reads a dataset written by write_dataset. X_raw is left empty.
Dataset read_dataset(const std::filesystem::path& csv_path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace fifuse
