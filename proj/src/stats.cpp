#include "fifuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fifuse::stats {

namespace {

void require_pair(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("correlation: length mismatch");
    if (a.size() < 3) throw std::invalid_argument("correlation: need at least 3 observations");
}

// Lentz's method, as in Numerical Recipes betacf.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 500;
    constexpr double eps = 1e-15;
    constexpr double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

std::vector<double> rank_descending(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] > v[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && v[order[j]] == v[order[i]]) ++j;
        // positions i..j-1 hold ranks i+1..j
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
        i = j;
    }
    return ranks;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

CorrelationResult kendall_tau(std::span<const double> a, std::span<const double> b) {
    require_pair(a, b);
    const std::size_t n = a.size();
    long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0) ++ties_a;
            if (db == 0.0) ++ties_b;
            if (da == 0.0 || db == 0.0) continue;
            if ((da > 0.0) == (db > 0.0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const long long pairs = static_cast<long long>(n * (n - 1) / 2);
    CorrelationResult r;
    r.n = n;
    if (ties_a == pairs || ties_b == pairs) {
        r.degenerate = true;
        return r;
    }
    const double denom = std::sqrt(static_cast<double>(pairs - ties_a) * static_cast<double>(pairs - ties_b));
    r.coefficient = std::clamp(static_cast<double>(concordant - discordant) / denom, -1.0, 1.0);
    const double nd = static_cast<double>(n);
    const double var = 2.0 * (2.0 * nd + 5.0) / (9.0 * nd * (nd - 1.0));
    const double z = r.coefficient / std::sqrt(var);
    r.p_value = std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0);
    return r;
}

CorrelationResult spearman_rho(std::span<const double> a, std::span<const double> b) {
    require_pair(a, b);
    const auto ra = rank_descending(a);
    const auto rb = rank_descending(b);
    const std::size_t n = a.size();
    const double ma = mean(ra), mb = mean(rb);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    CorrelationResult r;
    r.n = n;
    if (saa == 0.0 || sbb == 0.0) {
        r.degenerate = true;
        return r;
    }
    r.coefficient = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
    const double df = static_cast<double>(n) - 2.0;
    const double one_minus = 1.0 - r.coefficient * r.coefficient;
    if (one_minus <= 0.0) {
        r.p_value = 0.0;
        return r;
    }
    const double t = r.coefficient * std::sqrt(df / one_minus);
    r.p_value = std::clamp(2.0 * (1.0 - t_cdf(std::abs(t), df)), 0.0, 1.0);
    return r;
}

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete_beta: a and b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double t_cdf(double x, double df) {
    if (!(df > 0.0)) throw std::invalid_argument("t_cdf: df must be positive");
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (x == 0.0) return 0.5;
    if (std::isinf(x)) return x > 0.0 ? 1.0 : 0.0;
    // tail mass P(|T| > |x|) = I_{df/(df+x^2)}(df/2, 1/2)
    const double tail = incomplete_beta(df / 2.0, 0.5, df / (df + x * x));
    return x > 0.0 ? 1.0 - 0.5 * tail : 0.5 * tail;
}

double t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("t_quantile: p must lie in (0, 1)");
    if (p == 0.5) return 0.0;
    if (p < 0.5) return -t_quantile(1.0 - p, df);
    double lo = 0.0, hi = 1.0;
    while (t_cdf(hi, df) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) return hi;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (t_cdf(mid, df) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double thompson_tau_threshold(std::size_t n, double alpha) {
    if (n < 3) throw std::invalid_argument("thompson_tau_threshold: need n >= 3");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("thompson_tau_threshold: alpha must lie in (0, 1)");
    const double nd = static_cast<double>(n);
    const double t = t_quantile(1.0 - alpha / 2.0, nd - 2.0);
    return t * (nd - 1.0) / (std::sqrt(nd) * std::sqrt(nd - 2.0 + t * t));
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double quantile(std::span<const double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of empty range");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const double h = (static_cast<double>(s.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double median(std::span<const double> v) { return quantile(v, 0.5); }

}  // namespace fifuse::stats
