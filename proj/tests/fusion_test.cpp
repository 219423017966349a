#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "fifuse/fusion.hpp"
#include "fifuse/stats.hpp"
#include "support.hpp"

using namespace fifuse;

namespace {

ImportanceMatrix matrix_of(const std::vector<std::vector<double>>& rows) {
    Matrix raw(0, rows.front().size());
    for (const auto& r : rows) raw.append_row(r);
    return build_importance_matrix(raw);
}

// N x M matrix of random simplex rows; some rows share a common profile so
// the correlation-based strategies see both agreement and disagreement.
ImportanceMatrix random_matrix(std::size_t n, std::size_t m, std::mt19937_64& rng) {
    const auto common = testing::random_simplex(m, rng, 0.2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix raw(0, m);
    for (std::size_t r = 0; r < n; ++r) {
        auto row = testing::random_simplex(m, rng, 0.2);
        if (u(rng) < 0.5) {
            for (std::size_t c = 0; c < m; ++c) row[c] = common[c] + 0.05 * row[c];
        }
        raw.append_row(row);
    }
    return build_importance_matrix(raw);
}

std::vector<double> column_means(const Matrix& values, const std::vector<std::size_t>& rows) {
    std::vector<double> out(values.cols(), 0.0);
    for (auto r : rows) {
        for (std::size_t c = 0; c < values.cols(); ++c) out[c] += values(r, c);
    }
    for (auto& v : out) v /= static_cast<double>(rows.size());
    return out;
}

std::vector<double> renormalized(std::vector<double> v) {
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    for (auto& x : v) x /= s;
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

double mae(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("strategy names round trip") {
    for (auto s : kAllStrategies) CHECK(parse_strategy(to_string(s)) == s);
    CHECK(to_string(FusionStrategy::BoxWhiskers) == "box-whiskers");
    CHECK(to_string(FusionStrategy::RateSpearman) == "rate-spearman");
    CHECK_THROWS_AS(parse_strategy("geometric"), std::invalid_argument);
}

TEST_CASE("building the matrix normalizes absolute values") {
    const auto V = matrix_of({{2, 2}, {-1, 3}});
    check_close(std::vector<double>(V.values.row(0).begin(), V.values.row(0).end()), {0.5, 0.5}, 0);
    check_close(std::vector<double>(V.values.row(1).begin(), V.values.row(1).end()), {0.25, 0.75}, 0);
    CHECK(V.degenerate == std::vector<bool>{false, false});

    const auto Z = matrix_of({{0, 0, 0, 0}, {1, 0, 0, 0}});
    CHECK(Z.degenerate[0]);
    for (std::size_t c = 0; c < 4; ++c) CHECK(Z.values(0, c) == 0.25);

    std::vector<ImportanceVector> bad{{{1, 2}, "a"}, {{1, 2, 3}, "b"}};
    CHECK_THROWS_AS(build_importance_matrix(bad), std::invalid_argument);
    CHECK_THROWS_AS(build_importance_matrix(std::vector<ImportanceVector>{}), std::invalid_argument);
    CHECK_THROWS_AS(matrix_of({{1.0, NAN}}), std::invalid_argument);
}

TEST_CASE("mean and median examples") {
    const auto mean = fuse_mean(matrix_of({{0.5, 0.5}, {0.3, 0.7}}));
    check_close(mean.final, {0.4, 0.6}, 1e-15);
    CHECK(mean.retained_sources == std::vector<std::size_t>{0, 1});
    const auto median = fuse_median(matrix_of({{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}}));
    check_close(median.final, {0.5, 0.5}, 1e-15);
}

TEST_CASE("mode keeps the modal bin") {
    std::vector<bool> kept(3, true);
    CHECK(mode_column(std::vector<double>{0.10, 0.11, 0.52}, 0.05, kept) == doctest::Approx(0.105));
    CHECK(kept == std::vector<bool>{true, true, false});
    // every bin a singleton: the bin holding the median wins
    CHECK(mode_column(std::vector<double>{0.61, 0.02, 0.27}, 0.05, kept) == 0.27);
    CHECK(kept == std::vector<bool>{false, false, true});
    CHECK_THROWS_AS(mode_column(std::vector<double>{0.1}, 0.0, kept), std::invalid_argument);
}

TEST_CASE("box-whiskers drops values outside the Tukey fences") {
    std::vector<bool> kept(4, true);
    // quartiles 0.1 and 0.3 by linear interpolation; upper fence 0.6
    CHECK(box_whiskers_column(std::vector<double>{0.1, 0.1, 0.1, 0.9}, kept) == doctest::Approx(0.1));
    CHECK(kept == std::vector<bool>{true, true, true, false});
    kept.assign(2, true);
    CHECK(box_whiskers_column(std::vector<double>{0.2, 0.7}, kept) == doctest::Approx(0.45));
    CHECK(kept == std::vector<bool>{true, true});
}

TEST_CASE("tau test rejects the outlier and stops at the floor") {
    std::vector<bool> kept(4, true);
    CHECK(tau_test_column(std::vector<double>{0.10, 0.11, 0.09, 0.50}, 0.05, kept) == doctest::Approx(0.10));
    CHECK(kept == std::vector<bool>{true, true, true, false});
    CHECK(tau_test_column(std::vector<double>{0.3, 0.3, 0.3, 0.3}, 0.05, kept) == 0.3);
    CHECK(std::all_of(kept.begin(), kept.end(), [](bool k) { return k; }));
    kept.assign(2, true);
    CHECK(tau_test_column(std::vector<double>{0.0, 1.0}, 0.05, kept) == 0.5);
    CHECK_THROWS_AS(fuse_tau_test(matrix_of({{1, 2}}), 1.5), std::invalid_argument);
}

TEST_CASE("tau test agrees with a hand-rolled rejection loop") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(u(rng) * 8);
        std::vector<double> col(n);
        for (auto& v : col) v = u(rng) < 0.2 ? 0.5 + u(rng) : 0.1 * u(rng);
        std::vector<double> live = col;
        while (live.size() > 2) {
            const double mu = std::accumulate(live.begin(), live.end(), 0.0) / static_cast<double>(live.size());
            double ss = 0.0;
            for (double v : live) ss += (v - mu) * (v - mu);
            const double s = std::sqrt(ss / static_cast<double>(live.size() - 1));
            const double k = static_cast<double>(live.size());
            const double t = stats::t_quantile(0.975, static_cast<double>(live.size() - 2));
            const double tau = t * (k - 1) / (std::sqrt(k) * std::sqrt(k - 2 + t * t));
            auto worst = std::max_element(live.begin(), live.end(),
                                          [mu](double a, double b) { return std::abs(a - mu) < std::abs(b - mu); });
            if (!(s > 0.0) || std::abs(*worst - mu) <= tau * s) break;
            live.erase(worst);
        }
        std::vector<bool> kept(n, true);
        const double got = tau_test_column(col, 0.05, kept);
        CHECK(got == doctest::Approx(std::accumulate(live.begin(), live.end(), 0.0) / static_cast<double>(live.size())));
        CHECK(static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true)) == live.size());
    }
}

TEST_CASE("majority vote follows the modal rank") {
    // feature 0 is ranked [1,1,1,2] with values [0.30,0.32,0.28,0.10]
    const auto V = matrix_of({{0.30, 0.25, 0.25, 0.20},
                              {0.32, 0.30, 0.20, 0.18},
                              {0.28, 0.27, 0.25, 0.20},
                              {0.10, 0.80, 0.05, 0.05}});
    const auto r = fuse_majority_vote(V);
    std::vector<double> expected(4);
    for (std::size_t c = 0; c < 4; ++c) {
        std::vector<double> ranks;
        for (std::size_t row = 0; row < 4; ++row) ranks.push_back(stats::rank_descending(V.values.row(row))[c]);
        double best_rank = 0;
        std::size_t best = 0;
        for (double cand : ranks) {
            const auto k = static_cast<std::size_t>(std::count(ranks.begin(), ranks.end(), cand));
            if (k > best || (k == best && cand < best_rank)) {
                best = k;
                best_rank = cand;
            }
        }
        double s = 0.0;
        for (std::size_t row = 0; row < 4; ++row) s += ranks[row] == best_rank ? V.values(row, c) : 0.0;
        expected[c] = s / static_cast<double>(best);
    }
    std::vector<double> ranks0;
    for (std::size_t row = 0; row < 4; ++row) ranks0.push_back(stats::rank_descending(V.values.row(row))[0]);
    CHECK(ranks0 == std::vector<double>{1, 1, 1, 2});
    CHECK(expected[0] == doctest::Approx(0.30));
    check_close(r.final, renormalized(expected), 1e-15);

    // no majority among two rows: the better rank wins
    const auto two = fuse_majority_vote(matrix_of({{0.6, 0.3, 0.1}, {0.3, 0.6, 0.1}}));
    check_close(two.final, renormalized({0.6, 0.6, 0.1}), 1e-15);
}

TEST_CASE("RATE discards a reversed row") {
    const std::vector<double> row{0.5, 0.3, 0.15, 0.05};
    const std::vector<double> rev{0.05, 0.15, 0.3, 0.5};
    for (auto corr : {RankCorrelation::Kendall, RankCorrelation::Spearman}) {
        const auto r = fuse_rate(matrix_of({row, row, row, rev}), corr);
        CHECK(r.retained_sources == std::vector<std::size_t>{0, 1, 2});
        CHECK_FALSE(r.fallback);
        check_close(r.final, row, 1e-15);
        REQUIRE(r.truth_table);
        CHECK((*r.truth_table)[0][1]);
        CHECK_FALSE((*r.truth_table)[0][3]);
        CHECK_FALSE((*r.truth_table)[3][3]);
    }
}

TEST_CASE("RATE on ten features") {
    std::vector<double> row(10);
    for (std::size_t i = 0; i < 10; ++i) row[i] = static_cast<double>(10 - i);
    std::vector<double> rev(row.rbegin(), row.rend());
    const auto r = fuse_rate(matrix_of({row, rev, row, row}), RankCorrelation::Kendall);
    CHECK(r.retained_sources == std::vector<std::size_t>{0, 2, 3});
    check_close(r.final, renormalized(row), 1e-15);

    const auto pair = fuse_rate(matrix_of({row, row}), RankCorrelation::Kendall);
    CHECK(pair.retained_sources == std::vector<std::size_t>{0, 1});
    check_close(pair.final, renormalized(row), 1e-15);
}

TEST_CASE("RATE falls back to the mean on uncorrelated rows") {
    std::mt19937_64 rng(2024);
    std::size_t fallbacks = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Matrix raw(0, 10);
        for (int r = 0; r < 4; ++r) raw.append_row(testing::random_simplex(10, rng, 0.0));
        const auto V = build_importance_matrix(raw);
        const auto r = fuse_rate(V, RankCorrelation::Kendall);
        if (!r.fallback) continue;
        ++fallbacks;
        CHECK(r.retained_sources == std::vector<std::size_t>{0, 1, 2, 3});
        check_close(r.final, fuse_mean(V).final, 1e-15);
    }
    CHECK(fallbacks > 10);
}

TEST_CASE("RATE rejects unusable inputs") {
    CHECK_THROWS_AS(fuse_rate(matrix_of({{1, 2, 3}}), RankCorrelation::Kendall), std::invalid_argument);
    CHECK_THROWS_AS(fuse_rate(matrix_of({{1, 2}, {2, 1}}), RankCorrelation::Kendall), std::invalid_argument);
    CHECK_THROWS_AS(fuse_rate(matrix_of({{1, 2, 3}, {1, 2, 3}}), RankCorrelation::Kendall, 0.0), std::invalid_argument);
}

TEST_CASE("RATE output is the mean of its retained rows") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto V = random_matrix(2 + trial % 8, 3 + trial % 9, rng);
        for (auto corr : {RankCorrelation::Kendall, RankCorrelation::Spearman}) {
            const auto r = fuse_rate(V, corr);
            CHECK_FALSE(r.retained_sources.empty());
            check_close(r.final, renormalized(column_means(V.values, r.retained_sources)), 1e-12);
            for (std::size_t i = 0; i < V.n_sources(); ++i) {
                std::size_t votes = 0;
                for (std::size_t j = 0; j < V.n_sources(); ++j) votes += (*r.truth_table)[i][j] ? 1 : 0;
                const bool survives = 2 * votes > V.n_sources() - 1;
                const bool listed = std::count(r.retained_sources.begin(), r.retained_sources.end(), i) > 0;
                CHECK(listed == (survives || r.fallback));
            }
        }
    }
}

TEST_CASE("every strategy returns a simplex vector") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        const auto V = random_matrix(2 + trial % 9, 3 + trial % 14, rng);
        for (auto s : kAllStrategies) {
            const auto r = fuse(V, s);
            CHECK(r.strategy == s);
            CHECK(r.final.size() == V.n_features());
            CHECK(std::abs(std::accumulate(r.final.begin(), r.final.end(), 0.0) - 1.0) < 1e-9);
            CHECK(std::all_of(r.final.begin(), r.final.end(), [](double v) { return v >= 0.0; }));
            CHECK_FALSE(r.retained_sources.empty());
        }
    }
}

TEST_CASE("permuting features permutes every strategy's output") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 150; ++trial) {
        const auto V = random_matrix(2 + trial % 7, 3 + trial % 10, rng);
        const std::size_t m = V.n_features();
        std::vector<std::size_t> perm(m);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        ImportanceMatrix P = V;
        for (std::size_t r = 0; r < V.n_sources(); ++r) {
            for (std::size_t c = 0; c < m; ++c) P.values(r, c) = V.values(r, perm[c]);
        }
        for (auto s : kAllStrategies) {
            const auto a = fuse(V, s);
            const auto b = fuse(P, s);
            for (std::size_t c = 0; c < m; ++c) CHECK(std::abs(b.final[c] - a.final[perm[c]]) < 1e-12);
        }
    }
}

TEST_CASE("consensus rows come back unchanged") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 3 + trial % 12;
        const auto row = testing::random_simplex(m, rng, 0.3);
        Matrix raw(0, m);
        for (std::size_t r = 0; r < 2 + static_cast<std::size_t>(trial % 6); ++r) raw.append_row(row);
        const auto V = build_importance_matrix(raw);
        for (auto s : kAllStrategies) check_close(fuse(V, s).final, row, 1e-12);
    }
}

TEST_CASE("a single source is returned as is") {
    const auto V = matrix_of({{0.2, 0.5, 0.3}});
    for (auto s : {FusionStrategy::Mean, FusionStrategy::Median, FusionStrategy::Mode, FusionStrategy::BoxWhiskers,
                   FusionStrategy::TauTest, FusionStrategy::MajorityVote}) {
        check_close(fuse(V, s).final, {0.2, 0.5, 0.3}, 1e-15);
    }
}

TEST_CASE("scaling a raw source does not change any strategy") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 6;
        const std::size_t m = 3 + trial % 9;
        Matrix raw(0, m), scaled(0, m);
        for (std::size_t r = 0; r < n; ++r) {
            auto row = testing::random_simplex(m, rng, 0.2);
            raw.append_row(row);
            const double c = std::ldexp(1.0, static_cast<int>(u(rng) * 40) - 20);
            for (auto& v : row) v *= -c;  // signs are dropped as well
            scaled.append_row(row);
        }
        const auto A = build_importance_matrix(raw);
        const auto B = build_importance_matrix(scaled);
        for (auto s : kAllStrategies) CHECK(fuse(A, s).final == fuse(B, s).final);
    }
}

TEST_CASE("the fused mean is never worse than the worst source") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 2 + trial % 20;
        const auto V = random_matrix(1 + trial % 10, m, rng);
        const auto truth = testing::random_simplex(m, rng, 0.3);
        const auto fused = fuse_mean(V).final;
        double worst = 0.0;
        for (std::size_t r = 0; r < V.n_sources(); ++r) worst = std::max(worst, mae(V.values.row(r), truth));
        CHECK(mae(fused, truth) <= worst + 1e-12);
    }
}

TEST_CASE("averaging more sources reduces variance") {
    auto summed_variance = [](std::size_t n) {
        std::mt19937_64 rng(77);
        std::normal_distribution<double> g(0.0, 0.05);
        const std::vector<double> truth{0.4, 0.3, 0.2, 0.1};
        std::vector<std::vector<double>> outputs;
        for (int trial = 0; trial < 200; ++trial) {
            Matrix raw(0, 4);
            for (std::size_t r = 0; r < n; ++r) {
                std::vector<double> row(4);
                for (std::size_t c = 0; c < 4; ++c) row[c] = std::max(0.0, truth[c] + g(rng));
                raw.append_row(row);
            }
            outputs.push_back(fuse_mean(build_importance_matrix(raw)).final);
        }
        double total = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            double mu = 0.0;
            for (const auto& o : outputs) mu += o[c] / 200.0;
            for (const auto& o : outputs) total += (o[c] - mu) * (o[c] - mu) / 199.0;
        }
        return total;
    };
    CHECK(summed_variance(8) < summed_variance(2));
}

TEST_CASE("fusion result json") {
    const auto r = fuse_rate(matrix_of({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}}), RankCorrelation::Spearman);
    const auto j = r.to_json();
    CHECK(j.at("strategy") == "rate-spearman");
    CHECK(j.at("final").get<std::vector<double>>() == r.final);
    CHECK(j.contains("truth_table"));
    CHECK_FALSE(fuse_mean(matrix_of({{1, 2}})).to_json().contains("truth_table"));
}
