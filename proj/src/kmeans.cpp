#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "fifuse/explainers.hpp"
#include "fifuse/random.hpp"

namespace fifuse {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

Matrix plus_plus_seeding(const Matrix& X, std::size_t k, Rng& rng) {
    const std::size_t n = X.rows();
    Matrix centers(k, X.cols());
    std::vector<bool> chosen(n, false);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::size_t pick = first(rng);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < k; ++c) {
        chosen[pick] = true;
        std::copy(X.row(pick).begin(), X.row(pick).end(), centers.row(c).begin());
        if (c + 1 == k) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(X.row(i), centers.row(c)));
            total += d2[i];
        }
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            pick = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                target -= d2[i];
                if (target <= 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {  // rounding left a sliver: take the last positive-distance row
                for (std::size_t i = n; i-- > 0;) {
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            // every remaining row duplicates a center
            pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
        }
    }
    return centers;
}

}  // namespace

BackgroundSet kmeans_summarize(const Matrix& X, std::size_t k, std::uint64_t seed) {
    const std::size_t n = X.rows();
    const std::size_t m = X.cols();
    if (k == 0 || k > n) {
        throw std::invalid_argument("kmeans_summarize: k must lie in [1, " + std::to_string(n) + "]");
    }
    Rng rng(seed);
    Matrix centers = plus_plus_seeding(X, k, rng);
    std::vector<std::size_t> assign(n, 0);
    std::vector<double> dist(n, 0.0);
    std::vector<std::size_t> counts(k, 0);
    constexpr int kMaxIterations = 100;
    constexpr double kTolerance = 1e-6;
    const auto rows = static_cast<std::ptrdiff_t>(n);

    for (int iter = 0; iter < kMaxIterations; ++iter) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_distance(X.row(i), centers.row(c));
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            assign[i] = arg;
            dist[i] = best;
        }
        std::fill(counts.begin(), counts.end(), 0);
        for (auto a : assign) ++counts[a];

        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            // farthest point from its own center, among clusters that can spare one
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[assign[i]] < 2) continue;
                if (far == n || dist[i] > dist[far]) far = i;
            }
            if (far == n) throw std::logic_error("kmeans_summarize: cannot repopulate an empty cluster");
            --counts[assign[far]];
            assign[far] = c;
            dist[far] = 0.0;
            counts[c] = 1;
        }

        Matrix updated(k, m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto dst = updated.row(assign[i]);
            auto src = X.row(i);
            for (std::size_t j = 0; j < m; ++j) dst[j] += src[j];
        }
        double movement = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            for (auto& v : updated.row(c)) v /= static_cast<double>(counts[c]);
            movement = std::max(movement, std::sqrt(squared_distance(updated.row(c), centers.row(c))));
        }
        centers = std::move(updated);
        if (movement < kTolerance) break;
    }

    BackgroundSet bg;
    bg.centers = std::move(centers);
    bg.weights.assign(counts.begin(), counts.end());
    return bg;
}

}  // namespace fifuse
