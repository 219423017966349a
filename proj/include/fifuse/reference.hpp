#pragma once

// Serial reference implementations of the parallel kernels. They follow the
// textbook formulation step by step and exist to check the parallel kernels
// in tests and to give the benchmark a baseline.

#include <cstdint>
#include <span>
#include <vector>

#include "fifuse/explainers.hpp"
#include "fifuse/matrix.hpp"
#include "fifuse/regressor.hpp"

namespace fifuse::reference {

std::vector<double> predict(const Regressor& model, const Matrix& X);

/// Shuffle a column in place, score, put the column back; one feature at a time.
std::vector<double> permutation_importance(const Regressor& model, const Matrix& X, std::span<const double> y,
                                           std::size_t repeats, std::uint64_t seed);

/// For every feature, enumerates the coalitions that exclude it and
/// evaluates both coalition values from scratch.
Matrix exact_shapley_values(const Regressor& model, const Matrix& X_explain, const BackgroundSet& bg);

std::vector<double> global_ig(const Regressor& model, const Matrix& X_explain, const Baseline& b,
                              std::size_t steps);

}  // namespace fifuse::reference
