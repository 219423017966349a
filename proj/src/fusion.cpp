#include "fifuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "fifuse/stats.hpp"

namespace fifuse {

std::vector<double> l1_normalize(std::span<const double> v, bool* was_zero) {
    double total = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) throw std::invalid_argument("importance vector has a non-finite entry");
        total += std::abs(x);
    }
    std::vector<double> out(v.size());
    const bool zero = !(total > 0.0);
    if (was_zero) *was_zero = zero;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = zero ? 1.0 / static_cast<double>(v.size()) : std::abs(v[i]) / total;
    }
    return out;
}

ImportanceMatrix build_importance_matrix(const std::vector<ImportanceVector>& vectors) {
    if (vectors.empty()) throw std::invalid_argument("build_importance_matrix: no vectors");
    const std::size_t m = vectors.front().values.size();
    if (m == 0) throw std::invalid_argument("build_importance_matrix: empty vectors");
    ImportanceMatrix V;
    V.values = Matrix(vectors.size(), m);
    for (std::size_t r = 0; r < vectors.size(); ++r) {
        const auto& v = vectors[r];
        if (v.values.size() != m) {
            throw std::invalid_argument("build_importance_matrix: vector " + std::to_string(r) + " has length " +
                                        std::to_string(v.values.size()) + ", expected " + std::to_string(m));
        }
        bool zero = false;
        auto row = l1_normalize(v.values, &zero);
        std::copy(row.begin(), row.end(), V.values.row(r).begin());
        V.labels.push_back({v.model, v.method, v.split});
        V.degenerate.push_back(zero);
    }
    return V;
}

ImportanceMatrix build_importance_matrix(const Matrix& raw_rows) {
    std::vector<ImportanceVector> vectors;
    for (std::size_t r = 0; r < raw_rows.rows(); ++r) {
        ImportanceVector v;
        v.values.assign(raw_rows.row(r).begin(), raw_rows.row(r).end());
        v.model = "source" + std::to_string(r);
        vectors.push_back(std::move(v));
    }
    return build_importance_matrix(vectors);
}

std::string_view to_string(FusionStrategy s) {
    switch (s) {
        case FusionStrategy::Mean: return "mean";
        case FusionStrategy::Median: return "median";
        case FusionStrategy::Mode: return "mode";
        case FusionStrategy::BoxWhiskers: return "box-whiskers";
        case FusionStrategy::TauTest: return "tau-test";
        case FusionStrategy::MajorityVote: return "majority-vote";
        case FusionStrategy::RateKendall: return "rate-kendall";
        case FusionStrategy::RateSpearman: return "rate-spearman";
    }
    return "?";
}

FusionStrategy parse_strategy(std::string_view name) {
    for (auto s : kAllStrategies) {
        if (to_string(s) == name) return s;
    }
    throw std::invalid_argument("unknown fusion strategy '" + std::string(name) + "'");
}

nlohmann::json FusionResult::to_json() const {
    nlohmann::json j;
    j["strategy"] = to_string(strategy);
    j["final"] = final;
    j["retained_sources"] = retained_sources;
    if (truth_table) j["truth_table"] = *truth_table;
    j["fallback"] = fallback;
    j["degenerate"] = degenerate;
    return j;
}

namespace {

void require_matrix(const ImportanceMatrix& V) {
    if (V.n_sources() == 0 || V.n_features() == 0) throw std::invalid_argument("fusion: empty importance matrix");
}

void finish(FusionResult& r, std::vector<double> columns, const std::vector<bool>& contributed) {
    double total = 0.0;
    for (double v : columns) total += v;
    r.final.resize(columns.size());
    if (!(total > 0.0)) {
        r.degenerate = true;
        std::fill(r.final.begin(), r.final.end(), 1.0 / static_cast<double>(columns.size()));
    } else {
        for (std::size_t i = 0; i < columns.size(); ++i) r.final[i] = columns[i] / total;
    }
    r.retained_sources.clear();
    for (std::size_t i = 0; i < contributed.size(); ++i) {
        if (contributed[i]) r.retained_sources.push_back(i);
    }
}

// Applies a per-column reducer that reports which entries it kept.
template <typename Reducer>
FusionResult column_wise(const ImportanceMatrix& V, FusionStrategy strategy, Reducer&& reduce) {
    require_matrix(V);
    const std::size_t n = V.n_sources();
    FusionResult r;
    r.strategy = strategy;
    std::vector<double> columns(V.n_features());
    std::vector<bool> contributed(n, false);
    std::vector<bool> kept;
    for (std::size_t c = 0; c < V.n_features(); ++c) {
        const auto col = V.values.column(c);
        kept.assign(n, true);
        columns[c] = reduce(std::span<const double>(col), kept);
        for (std::size_t i = 0; i < n; ++i) contributed[i] = contributed[i] || kept[i];
    }
    finish(r, std::move(columns), contributed);
    return r;
}

std::vector<double> mean_of_rows(const Matrix& values, const std::vector<bool>& use) {
    std::vector<double> out(values.cols(), 0.0);
    std::size_t count = 0;
    for (std::size_t r = 0; r < values.rows(); ++r) {
        if (!use[r]) continue;
        ++count;
        auto row = values.row(r);
        for (std::size_t c = 0; c < values.cols(); ++c) out[c] += row[c];
    }
    for (auto& v : out) v /= static_cast<double>(count);
    return out;
}

}  // namespace

FusionResult fuse_mean(const ImportanceMatrix& V) {
    require_matrix(V);
    FusionResult r;
    r.strategy = FusionStrategy::Mean;
    std::vector<bool> all(V.n_sources(), true);
    finish(r, mean_of_rows(V.values, all), all);
    return r;
}

FusionResult fuse_median(const ImportanceMatrix& V) {
    return column_wise(V, FusionStrategy::Median,
                       [](std::span<const double> col, std::vector<bool>&) { return stats::median(col); });
}

double mode_column(std::span<const double> values, double bin_width, std::vector<bool>& kept) {
    if (!(bin_width > 0.0)) throw std::invalid_argument("fuse_mode: bin_width must be positive");
    std::map<long long, std::size_t> counts;
    std::vector<long long> bins(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        bins[i] = static_cast<long long>(std::floor(values[i] / bin_width));
        ++counts[bins[i]];
    }
    const long long median_bin = static_cast<long long>(std::floor(stats::median(values) / bin_width));
    std::size_t best_count = 0;
    long long best_bin = 0;
    for (const auto& [bin, count] : counts) {
        const bool better = count > best_count ||
                            (count == best_count && std::llabs(bin - median_bin) < std::llabs(best_bin - median_bin));
        if (better) {
            best_count = count;
            best_bin = bin;
        }
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        kept[i] = bins[i] == best_bin;
        if (kept[i]) sum += values[i];
    }
    return sum / static_cast<double>(best_count);
}

FusionResult fuse_mode(const ImportanceMatrix& V, double bin_width) {
    return column_wise(V, FusionStrategy::Mode, [bin_width](std::span<const double> col, std::vector<bool>& kept) {
        return mode_column(col, bin_width, kept);
    });
}

double box_whiskers_column(std::span<const double> values, std::vector<bool>& kept) {
    const double q1 = stats::quantile(values, 0.25);
    const double q3 = stats::quantile(values, 0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - 1.5 * iqr;
    const double hi = q3 + 1.5 * iqr;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        kept[i] = values[i] >= lo && values[i] <= hi;
        if (kept[i]) {
            sum += values[i];
            ++count;
        }
    }
    if (count == 0) {
        std::fill(kept.begin(), kept.end(), true);
        return stats::mean(values);
    }
    return sum / static_cast<double>(count);
}

FusionResult fuse_box_whiskers(const ImportanceMatrix& V) {
    return column_wise(V, FusionStrategy::BoxWhiskers, [](std::span<const double> col, std::vector<bool>& kept) {
        return box_whiskers_column(col, kept);
    });
}

double tau_test_column(std::span<const double> values, double alpha, std::vector<bool>& kept) {
    std::fill(kept.begin(), kept.end(), true);
    std::vector<double> current;
    while (true) {
        current.clear();
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (kept[i]) current.push_back(values[i]);
        }
        if (current.size() <= 2) break;
        const double mean = stats::mean(current);
        const double s = stats::sample_std(current);
        if (!(s > 0.0)) break;
        std::size_t worst = values.size();
        double worst_dev = -1.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!kept[i]) continue;
            const double dev = std::abs(values[i] - mean);
            if (dev > worst_dev) {
                worst_dev = dev;
                worst = i;
            }
        }
        if (worst_dev > stats::thompson_tau_threshold(current.size(), alpha) * s) {
            kept[worst] = false;
        } else {
            break;
        }
    }
    return stats::mean(current);
}

FusionResult fuse_tau_test(const ImportanceMatrix& V, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("fuse_tau_test: alpha must lie in (0, 1)");
    return column_wise(V, FusionStrategy::TauTest, [alpha](std::span<const double> col, std::vector<bool>& kept) {
        return tau_test_column(col, alpha, kept);
    });
}

FusionResult fuse_majority_vote(const ImportanceMatrix& V) {
    require_matrix(V);
    const std::size_t n = V.n_sources();
    const std::size_t m = V.n_features();
    Matrix ranks(n, m);
    for (std::size_t r = 0; r < n; ++r) {
        auto rk = stats::rank_descending(V.values.row(r));
        std::copy(rk.begin(), rk.end(), ranks.row(r).begin());
    }
    FusionResult result;
    result.strategy = FusionStrategy::MajorityVote;
    std::vector<double> columns(m);
    std::vector<bool> contributed(n, false);
    for (std::size_t c = 0; c < m; ++c) {
        std::map<double, std::size_t> votes;  // ordered by rank, so ties resolve to the better rank
        for (std::size_t r = 0; r < n; ++r) ++votes[ranks(r, c)];
        double modal_rank = 0.0;
        std::size_t modal_count = 0;
        for (const auto& [rank, count] : votes) {
            if (count > modal_count) {
                modal_count = count;
                modal_rank = rank;
            }
        }
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (ranks(r, c) == modal_rank) {
                sum += V.values(r, c);
                contributed[r] = true;
            }
        }
        columns[c] = sum / static_cast<double>(modal_count);
    }
    finish(result, std::move(columns), contributed);
    return result;
}

FusionResult fuse_rate(const ImportanceMatrix& V, RankCorrelation corr, double alpha) {
    require_matrix(V);
    const std::size_t n = V.n_sources();
    if (n < 2) throw std::invalid_argument("fuse_rate: needs at least two importance vectors");
    if (V.n_features() < 3) throw std::invalid_argument("fuse_rate: needs at least three features");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("fuse_rate: alpha must lie in (0, 1)");

    std::vector<std::vector<bool>> table(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto c = corr == RankCorrelation::Kendall ? stats::kendall_tau(V.values.row(i), V.values.row(j))
                                                            : stats::spearman_rho(V.values.row(i), V.values.row(j));
            const bool agree = !c.degenerate && c.p_value < alpha && c.coefficient > 0.0;
            table[i][j] = table[j][i] = agree;
        }
    }
    std::vector<bool> survive(n, false);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t votes = 0;
        for (std::size_t j = 0; j < n; ++j) votes += (i != j && table[i][j]) ? 1 : 0;
        survive[i] = 2 * votes > n - 1;
        any = any || survive[i];
    }
    FusionResult r;
    r.strategy = corr == RankCorrelation::Kendall ? FusionStrategy::RateKendall : FusionStrategy::RateSpearman;
    if (!any) {
        r.fallback = true;
        std::fill(survive.begin(), survive.end(), true);
    }
    finish(r, mean_of_rows(V.values, survive), survive);
    r.truth_table = std::move(table);
    return r;
}

FusionResult fuse(const ImportanceMatrix& V, FusionStrategy strategy, const FusionOptions& options) {
    switch (strategy) {
        case FusionStrategy::Mean: return fuse_mean(V);
        case FusionStrategy::Median: return fuse_median(V);
        case FusionStrategy::Mode: return fuse_mode(V, options.bin_width);
        case FusionStrategy::BoxWhiskers: return fuse_box_whiskers(V);
        case FusionStrategy::TauTest: return fuse_tau_test(V, options.alpha);
        case FusionStrategy::MajorityVote: return fuse_majority_vote(V);
        case FusionStrategy::RateKendall: return fuse_rate(V, RankCorrelation::Kendall, options.alpha);
        case FusionStrategy::RateSpearman: return fuse_rate(V, RankCorrelation::Spearman, options.alpha);
    }
    throw std::invalid_argument("unknown fusion strategy");
}

}  // namespace fifuse
