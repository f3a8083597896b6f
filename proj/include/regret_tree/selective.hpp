#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "regret_tree/error.hpp"

namespace regret_tree {

struct RegretScores {
    std::vector<double> leaf;
    std::vector<double> structural;
    std::vector<double> total;  // leaf + structural, element-wise

    std::size_t size() const { return leaf.size(); }
};

inline RegretScores make_regret_scores(std::vector<double> leaf,
                                       std::vector<double> structural) {
    require(leaf.size() == structural.size(), ErrorCode::length_mismatch,
            "leaf and structural scores must align");
    RegretScores scores;
    scores.total.resize(leaf.size());
    for (std::size_t i = 0; i < leaf.size(); ++i) {
        scores.total[i] = leaf[i] + structural[i];
    }
    scores.leaf = std::move(leaf);
    scores.structural = std::move(structural);
    return scores;
}

enum class RankStrategy { leaf, structural, total };

inline std::string to_string(RankStrategy s) {
    switch (s) {
        case RankStrategy::leaf: return "leaf";
        case RankStrategy::structural: return "structural";
        case RankStrategy::total: return "total";
    }
    return "unknown";
}

inline const std::vector<double>& strategy_scores(const RegretScores& scores,
                                                  RankStrategy strategy) {
    switch (strategy) {
        case RankStrategy::leaf: return scores.leaf;
        case RankStrategy::structural: return scores.structural;
        case RankStrategy::total: return scores.total;
    }
    return scores.total;
}

// Instance ids ordered by ascending score (most stable first); ties keep
// ascending id order.
inline std::vector<std::size_t> rank_by_score(const std::vector<double>& score) {
    require(!score.empty(), ErrorCode::empty_scores, "no scores to rank");
    std::vector<std::size_t> order(score.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] < score[b];
        return a < b;
    });
    return order;
}

inline std::vector<std::size_t> rank_by_regret(const RegretScores& scores,
                                               RankStrategy strategy) {
    return rank_by_score(strategy_scores(scores, strategy));
}

struct CurvePoint {
    double coverage = 0.0;
    std::optional<double> recall;  // empty when no positives remain
    std::size_t retained = 0;
    std::size_t retained_positives = 0;
};

struct SelectiveCurve {
    std::string strategy;
    std::vector<CurvePoint> points;  // coverage strictly decreasing
};

// Recall over the retained subset as coverage shrinks: at coverage c the
// ceil(c*n) lowest-score instances keep their predictions. Recall uses hard
// predictions; a retained set without positive labels yields an undefined
// point rather than zero.
inline SelectiveCurve curve_from_scores(const std::vector<int>& predictions,
                                        const std::vector<int>& labels,
                                        const std::vector<double>& score,
                                        const std::string& strategy_name,
                                        std::vector<double> grid) {
    require(predictions.size() == labels.size() && labels.size() == score.size(),
            ErrorCode::length_mismatch, "predictions, labels, and scores must align");
    require(!grid.empty(), ErrorCode::empty_grid, "coverage grid is empty");
    for (const auto c : grid) {
        require(c > 0.0 && c <= 1.0, ErrorCode::invalid_argument,
                "coverage levels must lie in (0,1]");
    }
    std::sort(grid.begin(), grid.end(), std::greater<>());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const auto order = rank_by_score(score);
    const std::size_t n = order.size();

    SelectiveCurve curve;
    curve.strategy = strategy_name;
    curve.points.reserve(grid.size());
    for (const auto coverage : grid) {
        const auto keep = static_cast<std::size_t>(
            std::ceil(coverage * static_cast<double>(n)));
        std::size_t true_positives = 0;
        std::size_t false_negatives = 0;
        for (std::size_t i = 0; i < keep; ++i) {
            const std::size_t id = order[i];
            if (labels[id] == 1) {
                if (predictions[id] == 1) {
                    ++true_positives;
                } else {
                    ++false_negatives;
                }
            }
        }
        CurvePoint point;
        point.coverage = coverage;
        point.retained = keep;
        point.retained_positives = true_positives + false_negatives;
        if (point.retained_positives > 0) {
            point.recall = static_cast<double>(true_positives) /
                           static_cast<double>(point.retained_positives);
        }
        curve.points.push_back(point);
    }
    return curve;
}

inline SelectiveCurve recall_coverage_curve(const std::vector<int>& predictions,
                                            const std::vector<int>& labels,
                                            const RegretScores& scores, RankStrategy strategy,
                                            const std::vector<double>& grid) {
    return curve_from_scores(predictions, labels, strategy_scores(scores, strategy),
                             to_string(strategy), grid);
}

// Largest coverage whose recall meets the target; empty when none qualifies.
inline std::optional<double> coverage_at_target(const SelectiveCurve& curve,
                                                double target_recall) {
    std::optional<double> best;
    for (const auto& point : curve.points) {
        if (!point.recall || *point.recall < target_recall) continue;
        if (!best || point.coverage > *best) best = point.coverage;
    }
    return best;
}

// Confidence ordering used as a comparison series: most confident first, so
// the score is distance-from-certainty.
inline std::vector<double> confidence_scores(const std::vector<double>& probabilities) {
    std::vector<double> score(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        score[i] = 0.5 - std::abs(probabilities[i] - 0.5);
    }
    return score;
}

inline std::vector<double> default_coverage_grid() {
    std::vector<double> grid;
    for (int pct = 100; pct >= 10; pct -= 5) {
        grid.push_back(static_cast<double>(pct) / 100.0);
    }
    return grid;
}

}  // namespace regret_tree
