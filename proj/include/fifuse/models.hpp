#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fifuse/matrix.hpp"
#include "fifuse/regressor.hpp"
#include "fifuse/tree.hpp"

namespace fifuse {

enum class ModelKind { RandomForest, GradientBoostedTrees, LinearSVR, DeepNeuralNetwork };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::RandomForest, ModelKind::GradientBoostedTrees,
                                              ModelKind::LinearSVR, ModelKind::DeepNeuralNetwork};

/// Short stable identifier: rf, gbt, svr, dnn.
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

enum class FeatureSubset { All, Sqrt };

/// max(1, floor(sqrt(p))) for Sqrt, p for All.
std::size_t resolve_max_features(FeatureSubset subset, std::size_t p);

struct ForestParams {
    std::size_t n_trees = 700;
    std::size_t max_depth = 7;
    std::size_t min_samples_split = 2;
    FeatureSubset max_features = FeatureSubset::Sqrt;
    bool bootstrap = true;
};

struct BoostingParams {
    std::size_t n_trees = 700;
    double learning_rate = 0.1;
    std::size_t max_depth = 7;
    std::size_t min_samples_split = 2;
    FeatureSubset max_features = FeatureSubset::Sqrt;
    SplitCriterion criterion = SplitCriterion::FriedmanMse;
};

struct SvrParams {
    double C = 2048.0;
    double epsilon = 0.5;
    std::size_t iterations = 3000;
    double step_size = 0.5;
};

struct MlpParams {
    std::vector<std::size_t> widths{64, 64, 32, 16, 8, 6, 4, 1};
    double learning_rate = 0.001;
    double l2 = 0.001;
    double dropout = 0.2;
    /// Dropout is applied only to hidden layers at least this wide; dropping
    /// units of the 4- to 16-wide bottleneck layers collapses the network.
    std::size_t dropout_min_width = 32;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
};

using Hyperparams = std::variant<ForestParams, BoostingParams, SvrParams, MlpParams>;

Hyperparams default_hyperparams(ModelKind kind);
ModelKind kind_of(const Hyperparams& hp);
/// Throws std::invalid_argument on non-positive counts or rates, dropout outside [0,1), etc.
void validate(const Hyperparams& hp);

nlohmann::json hyperparams_to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(ModelKind kind, const nlohmann::json& j);

class RandomForest final : public Regressor {
public:
    static RandomForest train(const Matrix& X, std::span<const double> y, const ForestParams& params,
                              std::uint64_t seed);
    std::size_t n_features() const override { return n_features_; }
    double predict_row(std::span<const double> x) const override;
    std::string name() const override { return "rf"; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

    nlohmann::json to_json() const;
    static RandomForest from_json(const nlohmann::json& j);

private:
    std::size_t n_features_ = 0;
    std::vector<RegressionTree> trees_;
};

class GradientBoostedTrees final : public Regressor {
public:
    static GradientBoostedTrees train(const Matrix& X, std::span<const double> y, const BoostingParams& params,
                                      std::uint64_t seed);
    std::size_t n_features() const override { return n_features_; }
    double predict_row(std::span<const double> x) const override;
    std::string name() const override { return "gbt"; }

    double initial_estimate() const noexcept { return init_; }
    double learning_rate() const noexcept { return learning_rate_; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
    /// Training-set MSE after each boosting round (entry 0 is the constant model).
    const std::vector<double>& training_curve() const noexcept { return curve_; }

    nlohmann::json to_json() const;
    static GradientBoostedTrees from_json(const nlohmann::json& j);

private:
    std::size_t n_features_ = 0;
    double init_ = 0.0;
    double learning_rate_ = 0.1;
    std::vector<RegressionTree> trees_;
    std::vector<double> curve_;
};

/// Linear epsilon-insensitive regressor fit in the primal by full-batch
/// subgradient descent on sum of losses + ||w||^2 / (2C).
class LinearSvr final : public Regressor {
public:
    static LinearSvr train(const Matrix& X, std::span<const double> y, const SvrParams& params);
    LinearSvr(std::vector<double> weights, double bias) : weights_(std::move(weights)), bias_(bias) {}

    std::size_t n_features() const override { return weights_.size(); }
    double predict_row(std::span<const double> x) const override;
    std::string name() const override { return "svr"; }

    const std::vector<double>& weights() const noexcept { return weights_; }
    double bias() const noexcept { return bias_; }

    nlohmann::json to_json() const;
    static LinearSvr from_json(const nlohmann::json& j);

private:
    std::vector<double> weights_;
    double bias_ = 0.0;
};

/// Fully connected network, ReLU on hidden layers, linear output. Targets
/// are standardized during training; predictions are mapped back through
/// `offset + scale * network(x)`.
class Mlp final : public Regressor {
public:
    struct Layer {
        std::size_t in = 0;
        std::size_t out = 0;
        std::vector<double> weights;  // out x in, row-major
        std::vector<double> bias;     // out
    };

    static Mlp train(const Matrix& X, std::span<const double> y, const MlpParams& params, std::uint64_t seed);
    /// Untrained network: He-uniform weights, hidden biases 0.1, output bias 0.
    static Mlp random(std::size_t n_inputs, const std::vector<std::size_t>& widths, std::uint64_t seed);
    Mlp(std::vector<Layer> layers, double offset = 0.0, double scale = 1.0);

    std::size_t n_features() const override { return layers_.front().in; }
    double predict_row(std::span<const double> x) const override;
    bool supports_input_gradient() const override { return true; }
    std::vector<double> input_gradient(std::span<const double> x) const override;
    std::string name() const override { return "dnn"; }

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    double offset() const noexcept { return offset_; }
    double scale() const noexcept { return scale_; }

    nlohmann::json to_json() const;
    static Mlp from_json(const nlohmann::json& j);

private:
    std::vector<Layer> layers_;
    double offset_ = 0.0;
    double scale_ = 1.0;
};

/// A trained model of one of the four kinds. Immutable and cheap to copy;
/// copies share the underlying regressor.
class TrainedModel {
public:
    TrainedModel(ModelKind kind, Hyperparams hp, std::shared_ptr<const Regressor> regressor);

    ModelKind kind() const noexcept { return kind_; }
    const Hyperparams& hyperparams() const noexcept { return hp_; }
    const Regressor& regressor() const noexcept { return *regressor_; }
    bool supports_input_gradient() const { return regressor_->supports_input_gradient(); }

    std::vector<double> predict(const Matrix& X) const { return regressor_->predict(X); }
    std::vector<double> input_gradient(std::span<const double> x) const { return regressor_->input_gradient(x); }

    nlohmann::json to_json() const;
    static TrainedModel from_json(const nlohmann::json& j);

private:
    ModelKind kind_;
    Hyperparams hp_;
    std::shared_ptr<const Regressor> regressor_;
};

/// Trains one model. Rejects empty or non-finite inputs, length mismatches
/// and a constant target.
TrainedModel train(ModelKind kind, const Matrix& X, std::span<const double> y, const Hyperparams& hp,
                   std::uint64_t seed);

}  // namespace fifuse
