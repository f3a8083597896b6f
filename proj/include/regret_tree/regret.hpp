#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "regret_tree/dataset.hpp"
#include "regret_tree/error.hpp"
#include "regret_tree/matrix.hpp"
#include "regret_tree/parallel.hpp"
#include "regret_tree/rng.hpp"
#include "regret_tree/tree.hpp"

namespace regret_tree {

// --- small statistics helpers ------------------------------------------------

inline double mean_of(const std::vector<double>& values) {
    double s = 0.0;
    for (const auto v : values) s += v;
    return s / static_cast<double>(values.size());
}

// Two-pass sample variance with divisor n-1, accumulated in index order so the
// result does not depend on how the values were produced.
inline double sample_variance(const std::vector<double>& values) {
    require(values.size() >= 2, ErrorCode::insufficient_realizations,
            "sample variance needs at least 2 values");
    const double m = mean_of(values);
    double ss = 0.0;
    for (const auto v : values) ss += (v - m) * (v - m);
    return ss / static_cast<double>(values.size() - 1);
}

// --- leaf regret -------------------------------------------------------------

// Conditional variance of the leaf estimator at true probability p: p(1-p)/n.
inline double leaf_regret_true(double p_star, std::size_t n_leaf) {
    require(p_star >= 0.0 && p_star <= 1.0, ErrorCode::invalid_probability,
            "p_star must lie in [0,1]");
    require(n_leaf >= 1, ErrorCode::zero_leaf_size, "leaf size must be >= 1");
    return p_star * (1.0 - p_star) / static_cast<double>(n_leaf);
}

// Distribution-free ceiling 1/(4n), attained at p = 1/2.
inline double leaf_regret_bound(std::size_t n_leaf) {
    require(n_leaf >= 1, ErrorCode::zero_leaf_size, "leaf size must be >= 1");
    return 0.25 / static_cast<double>(n_leaf);
}

// Plug-in estimate: substitutes the empirical leaf probability for p.
inline double leaf_regret_plugin(double p_hat, std::size_t n_leaf) {
    require(p_hat >= 0.0 && p_hat <= 1.0, ErrorCode::invalid_probability,
            "p_hat must lie in [0,1]");
    require(n_leaf >= 1, ErrorCode::zero_leaf_size, "leaf size must be >= 1");
    return p_hat * (1.0 - p_hat) / static_cast<double>(n_leaf);
}

struct LeafRegretEstimate {
    int leaf_id = -1;
    std::size_t n_leaf = 0;
    double p_hat = 0.0;
    double plugin = 0.0;
    double bound = 0.0;
    std::optional<double> mc;
};

inline std::vector<LeafRegretEstimate> leaf_regret_estimates(const Tree& tree) {
    std::vector<LeafRegretEstimate> out;
    out.reserve(tree.leaf_count());
    for (std::size_t k = 0; k < tree.leaf_count(); ++k) {
        const auto& leaf = tree.leaf(static_cast<int>(k));
        out.push_back({leaf.leaf_id, leaf.n_samples, leaf.p_hat,
                       leaf_regret_plugin(leaf.p_hat, leaf.n_samples),
                       leaf_regret_bound(leaf.n_samples), std::nullopt});
    }
    return out;
}

// Monte Carlo leaf regret: B resampled leaves of n_leaf Bernoulli(p_hat)
// draws; returns the sample variance of the replicate means (divisor B-1).
// Replicate b uses substream (seed, b); the reduction runs in index order.
inline double mc_leaf_regret(double p_hat, std::size_t n_leaf, std::size_t replications,
                             std::uint64_t seed) {
    require(p_hat >= 0.0 && p_hat <= 1.0, ErrorCode::invalid_probability,
            "p_hat must lie in [0,1]");
    require(n_leaf >= 1, ErrorCode::zero_leaf_size, "leaf size must be >= 1");
    require(replications >= 2, ErrorCode::insufficient_replications,
            "need at least 2 replications");
    std::vector<double> replicate_means(replications);
    parallel_for(replications, [&](std::size_t b) {
        Rng rng = Rng::substream(seed, b + 1);
        std::size_t ones = 0;
        for (std::size_t i = 0; i < n_leaf; ++i) {
            ones += rng.bernoulli(p_hat) ? 1u : 0u;
        }
        replicate_means[b] = static_cast<double>(ones) / static_cast<double>(n_leaf);
    });
    return sample_variance(replicate_means);
}

// --- structural regret ---------------------------------------------------------

enum class ResampleMode {
    bootstrap,     // n draws with replacement from the observed training set
    label_redraw,  // fresh Bernoulli labels from supplied ground-truth probabilities
};

inline std::string to_string(ResampleMode mode) {
    return mode == ResampleMode::bootstrap ? "bootstrap" : "label-redraw";
}

// One realization's view of a fixed eval point: the leaf it lands in and the
// tree's prediction there.
struct RealizationRecord {
    std::size_t n_leaf = 0;
    double p_hat = 0.0;
    double prediction = 0.0;
};

// Leaf records at each eval point across B resampled trees; result[e][b] is
// eval point e under replicate b. When cond_means is non-null (requires
// p_star) it receives the per-replicate oracle-probability average over the
// landing leaf's training rows. Replicate b derives its data from substream
// (seed, b), so output is identical for any parallelism degree.
inline std::vector<std::vector<RealizationRecord>> resampled_records(
    const Matrix& X, const std::vector<int>& y, const std::vector<double>& p_star,
    ResampleMode mode, const Matrix& eval_points, std::size_t replications,
    const TreeParams& params, std::uint64_t seed,
    std::vector<std::vector<double>>* cond_means = nullptr) {
    require(replications >= 2, ErrorCode::insufficient_replications,
            "need at least 2 replications");
    require(X.rows() >= params.min_leaf, ErrorCode::min_leaf_exceeds_data,
            "min_leaf exceeds training size");
    if (mode == ResampleMode::label_redraw || cond_means != nullptr) {
        require(p_star.size() == X.rows(), ErrorCode::length_mismatch,
                "ground-truth probabilities must cover every training row");
    }
    const std::size_t points = eval_points.rows();
    std::vector<std::vector<RealizationRecord>> records(
        points, std::vector<RealizationRecord>(replications));
    if (cond_means) cond_means->assign(points, std::vector<double>(replications, 0.0));
    parallel_for(replications, [&](std::size_t b) {
        Rng rng = Rng::substream(seed, b + 1);
        Tree tree;
        std::vector<std::size_t> sample;
        if (mode == ResampleMode::bootstrap) {
            sample.resize(X.rows());
            for (auto& idx : sample) idx = rng.next_below(X.rows());
            std::vector<int> sample_y(sample.size());
            for (std::size_t i = 0; i < sample.size(); ++i) sample_y[i] = y[sample[i]];
            tree = fit_tree(X.take_rows(sample), sample_y, params);
        } else {
            std::vector<int> redrawn(X.rows());
            for (std::size_t i = 0; i < redrawn.size(); ++i) {
                redrawn[i] = rng.bernoulli(p_star[i]) ? 1 : 0;
            }
            tree = fit_tree(X, redrawn, params);
        }
        for (std::size_t e = 0; e < points; ++e) {
            const auto& leaf = tree.leaf(tree.route(eval_points.row(e)));
            records[e][b] = {leaf.n_samples, leaf.p_hat, leaf.p_hat};
            if (cond_means) {
                double mean_p = 0.0;
                for (const auto member : leaf.members) {
                    // Bootstrap members index the resample, not the base rows.
                    mean_p += p_star[sample.empty() ? member : sample[member]];
                }
                (*cond_means)[e][b] = mean_p / static_cast<double>(leaf.n_samples);
            }
        }
    });
    return records;
}

// Variance of the prediction at each eval point across bootstrap-refitted
// trees (divisor B-1).
inline std::vector<double> mc_structural_regret_batch(const Dataset& train,
                                                      const Matrix& eval_points,
                                                      std::size_t replications,
                                                      const TreeParams& params,
                                                      std::uint64_t seed) {
    const auto records =
        resampled_records(train.features, train.labels, {}, ResampleMode::bootstrap,
                          eval_points, replications, params, seed);
    std::vector<double> out(eval_points.rows());
    std::vector<double> column(replications);
    for (std::size_t e = 0; e < eval_points.rows(); ++e) {
        for (std::size_t b = 0; b < replications; ++b) column[b] = records[e][b].prediction;
        out[e] = sample_variance(column);
    }
    return out;
}

inline double mc_structural_regret(const Dataset& train, std::span<const double> x,
                                   std::size_t replications, const TreeParams& params,
                                   std::uint64_t seed) {
    Matrix eval(1, x.size());
    for (std::size_t j = 0; j < x.size(); ++j) eval(0, j) = x[j];
    return mc_structural_regret_batch(train, eval, replications, params, seed).front();
}

// --- variance decomposition ----------------------------------------------------

struct Decomposition {
    double expected_leaf = 0.0;   // mean plug-in leaf regret across realizations
    double structural = 0.0;      // variance of conditional means across realizations
    double total_estimated = 0.0; // expected_leaf + structural
    double total_simulated = 0.0; // direct variance of the predictions
};

inline Decomposition decompose_variance(const std::vector<RealizationRecord>& realizations,
                                        const std::vector<double>& conditional_means) {
    require(realizations.size() == conditional_means.size(), ErrorCode::length_mismatch,
            "realization records and conditional means must align");
    require(realizations.size() >= 2, ErrorCode::insufficient_realizations,
            "need at least 2 realizations");
    Decomposition out;
    std::vector<double> predictions(realizations.size());
    double plugin_sum = 0.0;
    for (std::size_t r = 0; r < realizations.size(); ++r) {
        plugin_sum += leaf_regret_plugin(realizations[r].p_hat, realizations[r].n_leaf);
        predictions[r] = realizations[r].prediction;
    }
    out.expected_leaf = plugin_sum / static_cast<double>(realizations.size());
    out.structural = sample_variance(conditional_means);
    out.total_estimated = out.expected_leaf + out.structural;
    out.total_simulated = sample_variance(predictions);
    return out;
}

}  // namespace regret_tree
