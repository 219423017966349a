#include <numeric>
#include <stdexcept>

#include "fifuse/models.hpp"
#include "fifuse/random.hpp"

namespace fifuse {

RandomForest RandomForest::train(const Matrix& X, std::span<const double> y, const ForestParams& params,
                                 std::uint64_t seed) {
    RandomForest forest;
    forest.n_features_ = X.cols();
    const std::size_t n = X.rows();
    TreeParams tp;
    tp.max_depth = params.max_depth;
    tp.min_samples_split = params.min_samples_split;
    tp.max_features = resolve_max_features(params.max_features, X.cols());
    tp.criterion = SplitCriterion::SquaredError;

    forest.trees_.resize(params.n_trees);
    const auto n_trees = static_cast<std::ptrdiff_t>(params.n_trees);
    // every tree owns its stream, so the forest does not depend on thread count
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < n_trees; ++t) {
        Rng rng(derive_seed(seed, t));
        std::vector<std::size_t> rows(n);
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (auto& r : rows) r = pick(rng);
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        forest.trees_[static_cast<std::size_t>(t)] = RegressionTree::fit(X, y, rows, tp, rng);
    }
    return forest;
}

double RandomForest::predict_row(std::span<const double> x) const {
    double acc = 0.0;
    for (const auto& t : trees_) acc += t.predict_row(x);
    return acc / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"n_features", n_features_}, {"trees", trees}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
    RandomForest f;
    f.n_features_ = j.at("n_features").get<std::size_t>();
    for (const auto& t : j.at("trees")) f.trees_.push_back(RegressionTree::from_json(t));
    if (f.trees_.empty()) throw std::runtime_error("random forest has no trees");
    return f;
}

GradientBoostedTrees GradientBoostedTrees::train(const Matrix& X, std::span<const double> y,
                                                 const BoostingParams& params, std::uint64_t seed) {
    GradientBoostedTrees model;
    model.n_features_ = X.cols();
    model.learning_rate_ = params.learning_rate;
    const std::size_t n = X.rows();

    model.init_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    std::vector<double> fitted(n, model.init_);
    std::vector<double> residual(n);
    auto mse = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (y[i] - fitted[i]) * (y[i] - fitted[i]);
        return s / static_cast<double>(n);
    };
    model.curve_.push_back(mse());

    TreeParams tp;
    tp.max_depth = params.max_depth;
    tp.min_samples_split = params.min_samples_split;
    tp.max_features = resolve_max_features(params.max_features, X.cols());
    tp.criterion = params.criterion;

    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    Rng rng(seed);
    model.trees_.reserve(params.n_trees);
    for (std::size_t round = 0; round < params.n_trees; ++round) {
        // negative gradient of the squared loss; leaf means are the exact line search
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - fitted[i];
        auto tree = RegressionTree::fit(X, residual, rows, tp, rng);
        for (std::size_t i = 0; i < n; ++i) fitted[i] += params.learning_rate * tree.predict_row(X.row(i));
        model.trees_.push_back(std::move(tree));
        model.curve_.push_back(mse());
    }
    return model;
}

double GradientBoostedTrees::predict_row(std::span<const double> x) const {
    double acc = init_;
    for (const auto& t : trees_) acc += learning_rate_ * t.predict_row(x);
    return acc;
}

nlohmann::json GradientBoostedTrees::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"n_features", n_features_}, {"init", init_}, {"learning_rate", learning_rate_}, {"trees", trees}};
}

GradientBoostedTrees GradientBoostedTrees::from_json(const nlohmann::json& j) {
    GradientBoostedTrees g;
    g.n_features_ = j.at("n_features").get<std::size_t>();
    g.init_ = j.at("init").get<double>();
    g.learning_rate_ = j.at("learning_rate").get<double>();
    for (const auto& t : j.at("trees")) g.trees_.push_back(RegressionTree::from_json(t));
    return g;
}

}  // namespace fifuse
