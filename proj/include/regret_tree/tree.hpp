#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "regret_tree/dataset.hpp"
#include "regret_tree/error.hpp"
#include "regret_tree/matrix.hpp"

namespace regret_tree {

struct TreeParams {
    std::size_t min_leaf = 20;
    std::size_t max_depth = 8;  // 0 = root only
    double min_impurity_decrease = 0.0;
    std::uint64_t seed = 0;  // reserved for tie-breaking consistency
};

struct TreeNode {
    // Split fields; feature < 0 marks a leaf.
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    // Leaf fields.
    int leaf_id = -1;
    std::size_t n_samples = 0;
    double p_hat = 0.0;
    std::vector<std::size_t> members;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

class Tree {
  public:
    Tree() = default;
    Tree(std::size_t dim, std::vector<TreeNode> nodes, std::vector<int> leaf_nodes)
        : dim_(dim), nodes_(std::move(nodes)), leaf_nodes_(std::move(leaf_nodes)) {}

    std::size_t dimension() const { return dim_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t leaf_count() const { return leaf_nodes_.size(); }
    const TreeNode& leaf(int leaf_id) const {
        return nodes_[static_cast<std::size_t>(leaf_nodes_.at(static_cast<std::size_t>(leaf_id)))];
    }

    int route(std::span<const double> x) const {
        require(x.size() == dim_, ErrorCode::dimension_mismatch,
                "input has " + std::to_string(x.size()) + " features, tree expects " +
                    std::to_string(dim_));
        std::size_t at = 0;
        while (!nodes_[at].is_leaf()) {
            const auto& node = nodes_[at];
            at = static_cast<std::size_t>(
                x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                            : node.right);
        }
        return nodes_[at].leaf_id;
    }

    double predict_proba(std::span<const double> x) const { return leaf(route(x)).p_hat; }

    bool operator==(const Tree& other) const = default;

  private:
    std::size_t dim_ = 0;
    std::vector<TreeNode> nodes_;
    std::vector<int> leaf_nodes_;  // leaf id -> node index
};

namespace detail {

struct SplitChoice {
    std::size_t feature = 0;
    double threshold = 0.0;
    double decrease = -1.0;
};

inline double gini_from_counts(std::size_t positives, std::size_t total) {
    const double p = static_cast<double>(positives) / static_cast<double>(total);
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

// Best (feature, threshold) by Gini decrease over midpoint candidates,
// subject to min_leaf on both children. Ties resolve to the lowest feature
// index, then the lowest threshold: candidates are scanned in that order and
// replaced only on a strict improvement.
inline std::optional<SplitChoice> best_split(const Matrix& X, const std::vector<int>& y,
                                             const std::vector<std::size_t>& rows,
                                             std::size_t min_leaf) {
    const std::size_t n = rows.size();
    if (n < 2 * min_leaf) return std::nullopt;
    std::size_t positives = 0;
    for (const auto r : rows) positives += static_cast<std::size_t>(y[r]);
    const double parent_gini = gini_from_counts(positives, n);

    SplitChoice best;
    std::vector<std::pair<double, int>> column(n);
    for (std::size_t f = 0; f < X.cols(); ++f) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = {X(rows[i], f), y[rows[i]]};
        }
        std::sort(column.begin(), column.end());
        std::size_t left_n = 0;
        std::size_t left_pos = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            ++left_n;
            left_pos += static_cast<std::size_t>(column[i].second);
            if (column[i].first == column[i + 1].first) continue;
            if (left_n < min_leaf || n - left_n < min_leaf) continue;
            const double threshold = column[i].first + 0.5 * (column[i + 1].first - column[i].first);
            const double wl = static_cast<double>(left_n) / static_cast<double>(n);
            const double wr = static_cast<double>(n - left_n) / static_cast<double>(n);
            const double decrease = parent_gini -
                                    wl * gini_from_counts(left_pos, left_n) -
                                    wr * gini_from_counts(positives - left_pos, n - left_n);
            if (decrease > best.decrease) {
                best = {f, threshold, decrease};
            }
        }
    }
    if (best.decrease < 0.0) return std::nullopt;
    return best;
}

}  // namespace detail

inline Tree fit_tree(const Matrix& X, const std::vector<int>& y, const TreeParams& params) {
    require(X.rows() == y.size(), ErrorCode::length_mismatch,
            "feature matrix and labels disagree on instance count");
    require(X.rows() >= 1, ErrorCode::empty_training_set, "training set is empty");
    require(params.min_leaf >= 1, ErrorCode::invalid_argument, "min_leaf must be >= 1");
    require(X.rows() >= params.min_leaf, ErrorCode::min_leaf_exceeds_data,
            "min_leaf " + std::to_string(params.min_leaf) + " exceeds training size " +
                std::to_string(X.rows()));

    std::vector<TreeNode> nodes;
    std::vector<int> leaf_nodes;

    struct Frame {
        std::size_t node;
        std::vector<std::size_t> rows;
        std::size_t depth;
    };

    std::vector<std::size_t> all(X.rows());
    std::iota(all.begin(), all.end(), 0);
    nodes.emplace_back();
    // Explicit stack; expansion order matches recursive construction so the
    // node list layout is deterministic.
    std::vector<Frame> stack;
    stack.push_back({0, std::move(all), 0});
    while (!stack.empty()) {
        Frame frame = std::move(stack.back());
        stack.pop_back();
        const std::size_t n = frame.rows.size();
        std::size_t positives = 0;
        for (const auto r : frame.rows) positives += static_cast<std::size_t>(y[r]);
        const bool pure = positives == 0 || positives == n;

        std::optional<detail::SplitChoice> split;
        if (!pure && frame.depth < params.max_depth) {
            split = detail::best_split(X, y, frame.rows, params.min_leaf);
            if (split && split->decrease < params.min_impurity_decrease) split = std::nullopt;
        }

        if (!split) {
            TreeNode& leaf = nodes[frame.node];
            leaf.leaf_id = static_cast<int>(leaf_nodes.size());
            leaf.n_samples = n;
            leaf.p_hat = static_cast<double>(positives) / static_cast<double>(n);
            leaf.members = std::move(frame.rows);
            std::sort(leaf.members.begin(), leaf.members.end());
            leaf_nodes.push_back(static_cast<int>(frame.node));
            continue;
        }

        std::vector<std::size_t> left_rows, right_rows;
        for (const auto r : frame.rows) {
            (X(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
        }
        const std::size_t left_node = nodes.size();
        nodes.emplace_back();
        const std::size_t right_node = nodes.size();
        nodes.emplace_back();
        TreeNode& parent = nodes[frame.node];
        parent.feature = static_cast<int>(split->feature);
        parent.threshold = split->threshold;
        parent.left = static_cast<int>(left_node);
        parent.right = static_cast<int>(right_node);
        // Right pushed first so the left subtree is expanded (and numbered) next.
        stack.push_back({right_node, std::move(right_rows), frame.depth + 1});
        stack.push_back({left_node, std::move(left_rows), frame.depth + 1});
    }

    return Tree(X.cols(), std::move(nodes), std::move(leaf_nodes));
}

inline Tree fit_tree(const Dataset& train, const TreeParams& params) {
    return fit_tree(train.features, train.labels, params);
}

inline constexpr double kLogLossClip = 1e-12;

inline double log_loss(const Tree& tree, const Matrix& X, const std::vector<int>& y) {
    require(X.rows() == y.size(), ErrorCode::length_mismatch,
            "feature matrix and labels disagree on instance count");
    require(X.rows() >= 1, ErrorCode::empty_eval_set, "evaluation set is empty");
    double total = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const double raw = tree.predict_proba(X.row(i));
        const double p = std::min(std::max(raw, kLogLossClip), 1.0 - kLogLossClip);
        total += y[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(X.rows());
}

inline double log_loss(const Tree& tree, const Dataset& eval) {
    return log_loss(tree, eval.features, eval.labels);
}

// --- serialization ----------------------------------------------------------

inline nlohmann::json tree_to_json(const Tree& tree) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes()) {
        if (node.is_leaf()) {
            nodes.push_back({{"type", "leaf"},
                             {"leaf_id", node.leaf_id},
                             {"n", node.n_samples},
                             {"p_hat", node.p_hat},
                             {"members", node.members}});
        } else {
            nodes.push_back({{"type", "split"},
                             {"feature", node.feature},
                             {"threshold", node.threshold},
                             {"left", node.left},
                             {"right", node.right}});
        }
    }
    return {{"dimension", tree.dimension()}, {"nodes", nodes}};
}

inline Tree tree_from_json(const nlohmann::json& j) {
    std::vector<TreeNode> nodes;
    std::vector<int> leaf_nodes;
    const auto& in_nodes = j.at("nodes");
    for (const auto& entry : in_nodes) {
        TreeNode node;
        if (entry.at("type") == "leaf") {
            node.leaf_id = entry.at("leaf_id").get<int>();
            node.n_samples = entry.at("n").get<std::size_t>();
            node.p_hat = entry.at("p_hat").get<double>();
            node.members = entry.at("members").get<std::vector<std::size_t>>();
            if (static_cast<std::size_t>(node.leaf_id) >= leaf_nodes.size()) {
                leaf_nodes.resize(static_cast<std::size_t>(node.leaf_id) + 1, -1);
            }
            leaf_nodes[static_cast<std::size_t>(node.leaf_id)] =
                static_cast<int>(nodes.size());
        } else {
            node.feature = entry.at("feature").get<int>();
            node.threshold = entry.at("threshold").get<double>();
            node.left = entry.at("left").get<int>();
            node.right = entry.at("right").get<int>();
        }
        nodes.push_back(std::move(node));
    }
    for (const auto idx : leaf_nodes) {
        require(idx >= 0, ErrorCode::invalid_argument, "leaf ids are not contiguous");
    }
    return Tree(j.at("dimension").get<std::size_t>(), std::move(nodes), std::move(leaf_nodes));
}

}  // namespace regret_tree
