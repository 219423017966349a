#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fifuse::stats {

struct CorrelationResult {
    double coefficient = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    /// Set when either input is constant; coefficient is then 0 and p is 1.
    bool degenerate = false;
};

/// Rank 1 goes to the largest value; ties share the mean of the ranks they cover.
std::vector<double> rank_descending(std::span<const double> v);

/// Kendall tau-b. Two-sided p from the normal approximation with variance
/// 2(2n+5) / (9n(n-1)). Requires n >= 3.
CorrelationResult kendall_tau(std::span<const double> a, std::span<const double> b);

/// Pearson correlation of average ranks; two-sided p from t = r sqrt((n-2)/(1-r^2)).
CorrelationResult spearman_rho(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Student-t cumulative distribution function.
double t_cdf(double x, double df);

/// Inverse of t_cdf for p in (0, 1).
double t_quantile(double p, double df);

double normal_cdf(double x);

/// Modified Thompson tau: t(n-1) / (sqrt(n) sqrt(n-2+t^2)) with t the
/// two-sided critical value t_{alpha/2, n-2}. Requires n >= 3.
double thompson_tau_threshold(std::size_t n, double alpha);

double mean(std::span<const double> v);
/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> v);
double median(std::span<const double> v);
/// Quantile with linear interpolation between order statistics at (n-1)q.
double quantile(std::span<const double> v, double q);

}  // namespace fifuse::stats
