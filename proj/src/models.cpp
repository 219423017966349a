#include "fifuse/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fifuse {

std::vector<double> Regressor::predict(const Matrix& X) const {
    check_width(X.cols());
    std::vector<double> out(X.rows());
    const auto n = static_cast<std::ptrdiff_t>(X.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = predict_row(X.row(static_cast<std::size_t>(i)));
    }
    return out;
}

std::vector<double> Regressor::input_gradient(std::span<const double>) const {
    throw std::logic_error(name() + " does not provide input gradients");
}

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::RandomForest: return "rf";
        case ModelKind::GradientBoostedTrees: return "gbt";
        case ModelKind::LinearSVR: return "svr";
        case ModelKind::DeepNeuralNetwork: return "dnn";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view name) {
    for (auto k : kAllModelKinds) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown model kind '" + std::string(name) + "' (expected rf, gbt, svr or dnn)");
}

std::size_t resolve_max_features(FeatureSubset subset, std::size_t p) {
    if (subset == FeatureSubset::All) return p;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p)))));
}

Hyperparams default_hyperparams(ModelKind kind) {
    switch (kind) {
        case ModelKind::RandomForest: return ForestParams{};
        case ModelKind::GradientBoostedTrees: return BoostingParams{};
        case ModelKind::LinearSVR: return SvrParams{};
        case ModelKind::DeepNeuralNetwork: return MlpParams{};
    }
    throw std::invalid_argument("unknown model kind");
}

ModelKind kind_of(const Hyperparams& hp) {
    static constexpr ModelKind order[] = {ModelKind::RandomForest, ModelKind::GradientBoostedTrees,
                                          ModelKind::LinearSVR, ModelKind::DeepNeuralNetwork};
    return order[hp.index()];
}

void validate(const Hyperparams& hp) {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid hyperparameter: " + what); };
    if (auto* f = std::get_if<ForestParams>(&hp)) {
        if (f->n_trees == 0) fail("n_trees must be positive");
        if (f->min_samples_split < 2) fail("min_samples_split must be at least 2");
    } else if (auto* g = std::get_if<BoostingParams>(&hp)) {
        if (g->n_trees == 0) fail("n_trees must be positive");
        if (!(g->learning_rate >= 0.0) || !std::isfinite(g->learning_rate)) fail("learning_rate must be >= 0");
        if (g->min_samples_split < 2) fail("min_samples_split must be at least 2");
    } else if (auto* s = std::get_if<SvrParams>(&hp)) {
        if (!(s->C > 0.0)) fail("C must be positive");
        if (!(s->epsilon >= 0.0)) fail("epsilon must be non-negative");
        if (s->iterations == 0) fail("iterations must be positive");
        if (!(s->step_size > 0.0)) fail("step_size must be positive");
    } else if (auto* m = std::get_if<MlpParams>(&hp)) {
        if (m->widths.empty() || m->widths.back() != 1) fail("widths must end with a single output unit");
        for (auto w : m->widths) {
            if (w == 0) fail("layer widths must be positive");
        }
        if (!(m->learning_rate > 0.0)) fail("learning_rate must be positive");
        if (!(m->l2 >= 0.0)) fail("l2 must be non-negative");
        if (!(m->dropout >= 0.0 && m->dropout < 1.0)) fail("dropout must lie in [0, 1)");
        if (m->batch_size == 0) fail("batch_size must be positive");
    }
}

namespace {

std::string_view to_string(FeatureSubset s) { return s == FeatureSubset::Sqrt ? "sqrt" : "all"; }

FeatureSubset parse_subset(const std::string& s) {
    if (s == "sqrt") return FeatureSubset::Sqrt;
    if (s == "all") return FeatureSubset::All;
    throw std::invalid_argument("max_features must be 'sqrt' or 'all'");
}

std::string_view to_string(SplitCriterion c) {
    return c == SplitCriterion::FriedmanMse ? "friedman_mse" : "squared_error";
}

SplitCriterion parse_criterion(const std::string& s) {
    if (s == "friedman_mse") return SplitCriterion::FriedmanMse;
    if (s == "squared_error") return SplitCriterion::SquaredError;
    throw std::invalid_argument("criterion must be 'friedman_mse' or 'squared_error'");
}

}  // namespace

nlohmann::json hyperparams_to_json(const Hyperparams& hp) {
    return std::visit(
        [](const auto& p) -> nlohmann::json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ForestParams>) {
                return {{"n_trees", p.n_trees}, {"max_depth", p.max_depth},
                        {"min_samples_split", p.min_samples_split},
                        {"max_features", to_string(p.max_features)}, {"bootstrap", p.bootstrap}};
            } else if constexpr (std::is_same_v<T, BoostingParams>) {
                return {{"n_trees", p.n_trees}, {"learning_rate", p.learning_rate}, {"max_depth", p.max_depth},
                        {"min_samples_split", p.min_samples_split},
                        {"max_features", to_string(p.max_features)}, {"criterion", to_string(p.criterion)}};
            } else if constexpr (std::is_same_v<T, SvrParams>) {
                return {{"C", p.C}, {"epsilon", p.epsilon}, {"iterations", p.iterations},
                        {"step_size", p.step_size}};
            } else {
                return {{"widths", p.widths}, {"learning_rate", p.learning_rate}, {"l2", p.l2},
                        {"dropout", p.dropout}, {"dropout_min_width", p.dropout_min_width},
                        {"epochs", p.epochs}, {"batch_size", p.batch_size}};
            }
        },
        hp);
}

Hyperparams hyperparams_from_json(ModelKind kind, const nlohmann::json& j) {
    Hyperparams hp = default_hyperparams(kind);
    std::visit(
        [&j](auto& p) {
            using T = std::decay_t<decltype(p)>;
            auto get = [&j](const char* key, auto& field) {
                if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
            };
            if constexpr (std::is_same_v<T, ForestParams>) {
                get("n_trees", p.n_trees);
                get("max_depth", p.max_depth);
                get("min_samples_split", p.min_samples_split);
                if (j.contains("max_features")) p.max_features = parse_subset(j.at("max_features"));
                get("bootstrap", p.bootstrap);
            } else if constexpr (std::is_same_v<T, BoostingParams>) {
                get("n_trees", p.n_trees);
                get("learning_rate", p.learning_rate);
                get("max_depth", p.max_depth);
                get("min_samples_split", p.min_samples_split);
                if (j.contains("max_features")) p.max_features = parse_subset(j.at("max_features"));
                if (j.contains("criterion")) p.criterion = parse_criterion(j.at("criterion"));
            } else if constexpr (std::is_same_v<T, SvrParams>) {
                get("C", p.C);
                get("epsilon", p.epsilon);
                get("iterations", p.iterations);
                get("step_size", p.step_size);
            } else {
                get("widths", p.widths);
                get("learning_rate", p.learning_rate);
                get("l2", p.l2);
                get("dropout", p.dropout);
                get("dropout_min_width", p.dropout_min_width);
                get("epochs", p.epochs);
                get("batch_size", p.batch_size);
            }
        },
        hp);
    validate(hp);
    return hp;
}

TrainedModel::TrainedModel(ModelKind kind, Hyperparams hp, std::shared_ptr<const Regressor> regressor)
    : kind_(kind), hp_(std::move(hp)), regressor_(std::move(regressor)) {
    if (!regressor_) throw std::invalid_argument("TrainedModel: null regressor");
    if (kind_of(hp_) != kind_) throw std::invalid_argument("TrainedModel: hyperparameters do not match kind");
}

nlohmann::json TrainedModel::to_json() const {
    nlohmann::json params;
    switch (kind_) {
        case ModelKind::RandomForest: params = static_cast<const RandomForest&>(*regressor_).to_json(); break;
        case ModelKind::GradientBoostedTrees:
            params = static_cast<const GradientBoostedTrees&>(*regressor_).to_json();
            break;
        case ModelKind::LinearSVR: params = static_cast<const LinearSvr&>(*regressor_).to_json(); break;
        case ModelKind::DeepNeuralNetwork: params = static_cast<const Mlp&>(*regressor_).to_json(); break;
    }
    return {{"kind", to_string(kind_)}, {"hyperparams", hyperparams_to_json(hp_)}, {"parameters", params}};
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    auto hp = hyperparams_from_json(kind, j.at("hyperparams"));
    const auto& params = j.at("parameters");
    std::shared_ptr<const Regressor> r;
    switch (kind) {
        case ModelKind::RandomForest: r = std::make_shared<RandomForest>(RandomForest::from_json(params)); break;
        case ModelKind::GradientBoostedTrees:
            r = std::make_shared<GradientBoostedTrees>(GradientBoostedTrees::from_json(params));
            break;
        case ModelKind::LinearSVR: r = std::make_shared<LinearSvr>(LinearSvr::from_json(params)); break;
        case ModelKind::DeepNeuralNetwork: r = std::make_shared<Mlp>(Mlp::from_json(params)); break;
    }
    return TrainedModel(kind, std::move(hp), std::move(r));
}

TrainedModel train(ModelKind kind, const Matrix& X, std::span<const double> y, const Hyperparams& hp,
                   std::uint64_t seed) {
    if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("train: empty feature matrix");
    if (X.rows() != y.size()) {
        throw std::invalid_argument("train: " + std::to_string(X.rows()) + " rows but " + std::to_string(y.size()) +
                                    " targets");
    }
    if (kind_of(hp) != kind) throw std::invalid_argument("train: hyperparameters belong to another model kind");
    validate(hp);
    for (double v : X.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("train: non-finite feature value");
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw std::invalid_argument("train: non-finite target value");
    }
    const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (constant) throw std::invalid_argument("train: target has zero variance; nothing to learn");

    std::shared_ptr<const Regressor> r;
    switch (kind) {
        case ModelKind::RandomForest:
            r = std::make_shared<RandomForest>(RandomForest::train(X, y, std::get<ForestParams>(hp), seed));
            break;
        case ModelKind::GradientBoostedTrees:
            r = std::make_shared<GradientBoostedTrees>(
                GradientBoostedTrees::train(X, y, std::get<BoostingParams>(hp), seed));
            break;
        case ModelKind::LinearSVR:
            r = std::make_shared<LinearSvr>(LinearSvr::train(X, y, std::get<SvrParams>(hp)));
            break;
        case ModelKind::DeepNeuralNetwork:
            r = std::make_shared<Mlp>(Mlp::train(X, y, std::get<MlpParams>(hp), seed));
            break;
    }
    return TrainedModel(kind, hp, std::move(r));
}

}  // namespace fifuse
