#include "fifuse/tree.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace fifuse {

namespace {

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

double split_gain(SplitCriterion criterion, double sum_l, double n_l, double sum_r, double n_r) {
    if (criterion == SplitCriterion::FriedmanMse) {
        const double diff = sum_l / n_l - sum_r / n_r;
        return n_l * n_r / (n_l + n_r) * diff * diff;
    }
    // SSE reduction up to the node constant sum^2/n, which is the same for every split
    return sum_l * sum_l / n_l + sum_r * sum_r / n_r;
}

class Builder {
public:
    Builder(const Matrix& X, std::span<const double> y, const TreeParams& params, Rng& rng,
            std::vector<RegressionTree::Node>& nodes)
        : X_(X), y_(y), params_(params), rng_(rng), nodes_(nodes) {}

    std::uint32_t build(std::vector<std::size_t>& rows, std::size_t depth) {
        const auto id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        double sum = 0.0;
        for (auto r : rows) sum += y_[r];
        nodes_[id].value = sum / static_cast<double>(rows.size());

        const bool depth_ok = params_.max_depth == 0 || depth < params_.max_depth;
        if (!depth_ok || rows.size() < std::max<std::size_t>(params_.min_samples_split, 2) || is_pure(rows)) {
            return id;
        }
        auto choice = best_split(rows, sum);
        if (!choice.found) return id;

        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            (X_(r, choice.feature) <= choice.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        nodes_[id].feature = static_cast<std::int32_t>(choice.feature);
        nodes_[id].threshold = choice.threshold;
        const auto l = build(left, depth + 1);
        const auto r = build(right, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

private:
    bool is_pure(const std::vector<std::size_t>& rows) const {
        const double first = y_[rows.front()];
        return std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return y_[r] == first; });
    }

    SplitChoice best_split(const std::vector<std::size_t>& rows, double total) {
        const std::size_t p = X_.cols();
        const std::size_t budget = params_.max_features == 0 ? p : std::min(params_.max_features, p);
        std::vector<std::size_t> order(p);
        std::iota(order.begin(), order.end(), 0);
        if (budget < p) std::shuffle(order.begin(), order.end(), rng_);

        const double n = static_cast<double>(rows.size());
        const double parent = params_.criterion == SplitCriterion::FriedmanMse ? 0.0 : total * total / n;
        SplitChoice best;
        std::vector<std::pair<double, double>> column(rows.size());
        std::size_t examined = 0;
        for (std::size_t f : order) {
            if (examined == budget) break;
            for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {X_(rows[i], f), y_[rows[i]]};
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (column.front().first == column.back().first) continue;  // constant here
            ++examined;
            double sum_l = 0.0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                sum_l += column[i].second;
                if (column[i].first == column[i + 1].first) continue;
                const double n_l = static_cast<double>(i + 1);
                const double gain =
                    split_gain(params_.criterion, sum_l, n_l, total - sum_l, n - n_l) - parent;
                const bool better = !best.found || gain > best.gain || (gain == best.gain && f < best.feature);
                if (gain > 0.0 && better) {
                    double threshold = 0.5 * (column[i].first + column[i + 1].first);
                    if (!(threshold < column[i + 1].first)) threshold = column[i].first;
                    best = {true, f, threshold, gain};
                }
            }
        }
        return best;
    }

    const Matrix& X_;
    std::span<const double> y_;
    const TreeParams& params_;
    Rng& rng_;
    std::vector<RegressionTree::Node>& nodes_;
};

}  // namespace

RegressionTree RegressionTree::fit(const Matrix& X, std::span<const double> y, std::span<const std::size_t> rows,
                                   const TreeParams& params, Rng& rng) {
    if (rows.empty()) throw std::invalid_argument("RegressionTree::fit: no rows");
    if (X.rows() != y.size()) throw std::invalid_argument("RegressionTree::fit: X and y disagree in length");
    RegressionTree tree;
    std::vector<std::size_t> work(rows.begin(), rows.end());
    Builder(X, y, params, rng, tree.nodes_).build(work, 0);
    return tree;
}

double RegressionTree::predict_row(std::span<const double> x) const {
    std::uint32_t i = 0;
    while (nodes_[i].feature >= 0) {
        const auto& n = nodes_[i];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[i].value;
}

std::size_t RegressionTree::depth() const {
    std::function<std::size_t(std::uint32_t)> walk = [&](std::uint32_t i) -> std::size_t {
        if (nodes_[i].feature < 0) return 0;
        return 1 + std::max(walk(nodes_[i].left), walk(nodes_[i].right));
    };
    return nodes_.empty() ? 0 : walk(0);
}

bool RegressionTree::uses_feature(std::size_t f) const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [f](const Node& n) { return n.feature == static_cast<std::int32_t>(f); });
}

nlohmann::json RegressionTree::to_json() const {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   value = nlohmann::json::array();
    for (const auto& n : nodes_) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
    RegressionTree t;
    const auto& feature = j.at("feature");
    t.nodes_.resize(feature.size());
    for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
        auto& n = t.nodes_[i];
        n.feature = feature[i].get<std::int32_t>();
        n.threshold = j.at("threshold")[i].get<double>();
        n.left = j.at("left")[i].get<std::uint32_t>();
        n.right = j.at("right")[i].get<std::uint32_t>();
        n.value = j.at("value")[i].get<double>();
    }
    if (t.nodes_.empty()) throw std::runtime_error("tree has no nodes");
    return t;
}

}  // namespace fifuse
