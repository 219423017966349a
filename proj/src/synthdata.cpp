#include "fifuse/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "fifuse/csv.hpp"
#include "fifuse/random.hpp"

namespace fifuse {

std::size_t DataConfig::informative_count() const {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(n_features) * informative_pct / 100.0));
}

void DataConfig::validate() const {
    if (n_samples < 2) throw std::invalid_argument("n_samples must be at least 2");
    if (n_features == 0) throw std::invalid_argument("n_features must be positive");
    if (!(informative_pct > 0.0 && informative_pct <= 100.0)) {
        throw std::invalid_argument("informative_pct must lie in (0, 100]");
    }
    if (informative_count() == 0) {
        throw std::invalid_argument("informative_pct leaves no informative feature");
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
        throw std::invalid_argument("noise_std must be a finite non-negative number");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must lie in (0, 1)");
    }
    auto n_train = train_row_count(n_samples, train_fraction);
    if (n_train == 0 || n_train == n_samples) {
        throw std::invalid_argument("train_fraction leaves the train or test split empty");
    }
}

std::size_t train_row_count(std::size_t n_samples, double train_fraction) {
    // the small slack keeps e.g. 100 * 0.29 from flooring to 28
    return static_cast<std::size_t>(std::floor(static_cast<double>(n_samples) * train_fraction + 1e-9));
}

Dataset generate_dataset(const DataConfig& config) {
    config.validate();
    const std::size_t n = config.n_samples;
    const std::size_t m = config.n_features;
    const std::size_t k = config.informative_count();

    Rng rng(config.seed);
    std::normal_distribution<double> standard_normal(0.0, 1.0);
    std::uniform_real_distribution<double> coef_dist(1.0, 100.0);

    Matrix raw(n, m);
    for (auto& v : raw.data()) v = standard_normal(rng);

    std::vector<std::size_t> features(m);
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng);
    std::vector<double> coef(m, 0.0);
    for (std::size_t i = 0; i < k; ++i) coef[features[i]] = coef_dist(rng);

    std::vector<double> y(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        auto row = raw.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < m; ++c) acc += row[c] * coef[c];
        y[r] = acc;
    }
    if (config.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, config.noise_std);
        for (auto& v : y) v += noise(rng);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    Dataset d;
    d.X_raw = raw.select_rows(order);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.y[i] = y[order[i]];

    d.X = d.X_raw;
    for (std::size_t c = 0; c < m; ++c) {
        double lo = d.X(0, c), hi = d.X(0, c);
        for (std::size_t r = 1; r < n; ++r) {
            lo = std::min(lo, d.X(r, c));
            hi = std::max(hi, d.X(r, c));
        }
        const double range = hi - lo;
        for (std::size_t r = 0; r < n; ++r) {
            d.X(r, c) = range > 0.0 ? (d.X(r, c) - lo) / range : 0.0;
        }
    }

    d.true_coefficients = std::move(coef);
    d.config = config;
    d.split_index = train_row_count(n, config.train_fraction);
    return d;
}

GroundTruthImportance ground_truth_importance(const std::vector<double>& coefficients) {
    double total = 0.0;
    for (double c : coefficients) total += std::abs(c);
    if (!(total > 0.0)) throw std::invalid_argument("ground truth needs a nonzero coefficient");
    GroundTruthImportance g;
    g.values.reserve(coefficients.size());
    for (double c : coefficients) g.values.push_back(std::abs(c) / total);
    return g;
}

GroundTruthImportance ground_truth_importance(const Dataset& d) {
    return ground_truth_importance(d.true_coefficients);
}

std::pair<SplitView, SplitView> split(const Dataset& d) {
    const std::size_t n = d.n_samples();
    SplitView train{d.X.slice_rows(0, d.split_index),
                    std::vector<double>(d.y.begin(), d.y.begin() + static_cast<std::ptrdiff_t>(d.split_index))};
    SplitView test{d.X.slice_rows(d.split_index, n),
                   std::vector<double>(d.y.begin() + static_cast<std::ptrdiff_t>(d.split_index), d.y.end())};
    return {std::move(train), std::move(test)};
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".json");
    return p;
}

void write_dataset(const Dataset& d, const std::filesystem::path& csv_path) {
    const std::size_t m = d.n_features();
    csv::Table t;
    for (std::size_t c = 0; c < m; ++c) t.header.push_back("f" + std::to_string(c));
    t.header.push_back("y");
    t.rows.reserve(d.n_samples());
    for (std::size_t r = 0; r < d.n_samples(); ++r) {
        std::vector<std::string> fields;
        fields.reserve(m + 1);
        for (double v : d.X.row(r)) fields.push_back(csv::format_double(v));
        fields.push_back(csv::format_double(d.y[r]));
        t.rows.push_back(std::move(fields));
    }
    csv::write(csv_path, t);

    nlohmann::json j;
    j["n_samples"] = d.config.n_samples;
    j["n_features"] = d.config.n_features;
    j["informative_pct"] = d.config.informative_pct;
    j["noise_std"] = d.config.noise_std;
    j["seed"] = d.config.seed;
    j["train_fraction"] = d.config.train_fraction;
    j["split_index"] = d.split_index;
    j["true_coefficients"] = d.true_coefficients;
    auto side = sidecar_path(csv_path);
    std::ofstream out(side);
    if (!out) throw std::runtime_error("cannot open " + side.string() + " for writing");
    // nlohmann dumps doubles with round-trip precision
    out << j.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& csv_path) {
    auto t = csv::read(csv_path);
    if (t.header.size() < 2 || t.header.back() != "y") {
        throw std::runtime_error(csv_path.string() + ": expected header f0,...,f{M-1},y");
    }
    const std::size_t m = t.header.size() - 1;
    Dataset d;
    d.X = Matrix(t.rows.size(), m);
    d.y.resize(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 0; c < m; ++c) d.X(r, c) = csv::parse_double(t.rows[r][c]);
        d.y[r] = csv::parse_double(t.rows[r][m]);
    }

    auto side = sidecar_path(csv_path);
    std::ifstream in(side);
    if (!in) throw std::runtime_error("missing sidecar " + side.string());
    nlohmann::json j;
    try {
        in >> j;
        d.config.n_samples = j.at("n_samples").get<std::size_t>();
        d.config.n_features = j.at("n_features").get<std::size_t>();
        d.config.informative_pct = j.at("informative_pct").get<double>();
        d.config.noise_std = j.at("noise_std").get<double>();
        d.config.seed = j.at("seed").get<std::uint64_t>();
        d.config.train_fraction = j.at("train_fraction").get<double>();
        d.split_index = j.at("split_index").get<std::size_t>();
        d.true_coefficients = j.at("true_coefficients").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(side.string() + ": " + e.what());
    }
    if (d.true_coefficients.size() != m || d.split_index > d.X.rows()) {
        throw std::runtime_error(side.string() + ": sidecar does not match " + csv_path.string());
    }
    return d;
}

}  // namespace fifuse
