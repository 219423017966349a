#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "fifuse/matrix.hpp"
#include "fifuse/random.hpp"

namespace fifuse {

enum class SplitCriterion { SquaredError, FriedmanMse };

struct TreeParams {
    std::size_t max_depth = 7;  // 0 means unlimited
    std::size_t min_samples_split = 2;
    std::size_t max_features = 0;  // features examined per split; 0 means all
    SplitCriterion criterion = SplitCriterion::SquaredError;
};

/// CART regression tree stored as a flat node array.
///
/// Split search visits features in a random order and stops once
/// `max_features` features with at least one usable threshold have been
/// examined. Among equal-gain candidates the lowest feature index wins, and
/// within a feature the lowest threshold.
class RegressionTree {
public:
    struct Node {
        std::int32_t feature = -1;  // -1 marks a leaf
        double threshold = 0.0;     // go left when x[feature] <= threshold
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        double value = 0.0;
    };

    static RegressionTree fit(const Matrix& X, std::span<const double> y, std::span<const std::size_t> rows,
                              const TreeParams& params, Rng& rng);

    double predict_row(std::span<const double> x) const;

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t depth() const;
    bool uses_feature(std::size_t f) const;

    nlohmann::json to_json() const;
    static RegressionTree from_json(const nlohmann::json& j);

private:
    std::vector<Node> nodes_;
};

}  // namespace fifuse
