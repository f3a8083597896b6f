#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "regret_tree/dataset.hpp"
#include "regret_tree/error.hpp"
#include "regret_tree/matrix.hpp"
#include "regret_tree/parallel.hpp"
#include "regret_tree/regret.hpp"
#include "regret_tree/rng.hpp"
#include "regret_tree/tree.hpp"

namespace regret_tree {

struct OracleModel {
    std::vector<double> weights;  // original feature scale
    double intercept = 0.0;
    bool converged = false;
    double final_gradient_norm = 0.0;  // max-norm on the standardized problem
    bool newton_fallback = false;      // a gradient step replaced a Newton step
    std::vector<double> objective_trace;
};

namespace detail {

// Solves A x = b for symmetric positive definite A (row-major, dim x dim)
// by Cholesky. A is destroyed. Throws singular_hessian when a pivot fails.
inline std::vector<double> cholesky_solve(std::vector<double>& A, std::vector<double> b,
                                          std::size_t dim) {
    for (std::size_t j = 0; j < dim; ++j) {
        double diag = A[j * dim + j];
        for (std::size_t k = 0; k < j; ++k) diag -= A[j * dim + k] * A[j * dim + k];
        require(diag > 1e-300, ErrorCode::singular_hessian, "non-positive pivot");
        const double root = std::sqrt(diag);
        A[j * dim + j] = root;
        for (std::size_t i = j + 1; i < dim; ++i) {
            double v = A[i * dim + j];
            for (std::size_t k = 0; k < j; ++k) v -= A[i * dim + k] * A[j * dim + k];
            A[i * dim + j] = v / root;
        }
    }
    for (std::size_t i = 0; i < dim; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= A[i * dim + k] * b[k];
        b[i] = v / A[i * dim + i];
    }
    for (std::size_t ir = dim; ir > 0; --ir) {
        const std::size_t i = ir - 1;
        double v = b[i];
        for (std::size_t k = i + 1; k < dim; ++k) v -= A[k * dim + i] * b[k];
        b[i] = v / A[i * dim + i];
    }
    return b;
}

struct Standardization {
    std::vector<double> mean;
    std::vector<double> scale;
};

inline Standardization column_standardization(const Matrix& X) {
    Standardization s;
    s.mean.assign(X.cols(), 0.0);
    s.scale.assign(X.cols(), 1.0);
    const auto n = static_cast<double>(X.rows());
    for (std::size_t j = 0; j < X.cols(); ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < X.rows(); ++i) m += X(i, j);
        m /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < X.rows(); ++i) {
            const double dx = X(i, j) - m;
            var += dx * dx;
        }
        var /= n;
        s.mean[j] = m;
        s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

}  // namespace detail

inline constexpr double kOracleRidge = 1e-4;

// Penalized logistic regression: mean cross-entropy plus (lambda/2)||w||^2
// with the intercept unpenalized. Features are standardized internally and
// the solution is mapped back to the original scale. Newton steps with step
// halving; if the Hessian solve fails the iteration falls back to a gradient
// step and the model is flagged. Deterministic: zero initialization.
inline OracleModel fit_logistic(const Matrix& X, const std::vector<int>& y, double tol = 1e-8,
                                std::size_t max_iter = 100) {
    require(X.rows() == y.size(), ErrorCode::length_mismatch,
            "feature matrix and labels disagree on instance count");
    require(X.rows() >= 2, ErrorCode::single_class_data, "need at least 2 instances");
    require(tol > 0.0, ErrorCode::invalid_argument, "tolerance must be positive");
    const std::size_t positives =
        static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    require(positives > 0 && positives < y.size(), ErrorCode::single_class_data,
            "both label classes must be present");

    const std::size_t n = X.rows();
    const std::size_t d = X.cols();
    const std::size_t dim = d + 1;  // weights then intercept
    const auto std_info = detail::column_standardization(X);
    Matrix Z(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            Z(i, j) = (X(i, j) - std_info.mean[j]) / std_info.scale[j];
        }
    }

    std::vector<double> theta(dim, 0.0);
    std::vector<double> margin(n), prob(n);
    const auto compute_margins = [&](const std::vector<double>& t) {
        for (std::size_t i = 0; i < n; ++i) {
            double z = t[d];
            for (std::size_t j = 0; j < d; ++j) z += t[j] * Z(i, j);
            margin[i] = z;
        }
    };
    const auto objective = [&](const std::vector<double>& t) {
        compute_margins(t);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            // -log sigmoid(+/- margin), written to avoid overflow.
            const double z = y[i] == 1 ? margin[i] : -margin[i];
            loss += z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
        }
        loss /= static_cast<double>(n);
        double penalty = 0.0;
        for (std::size_t j = 0; j < d; ++j) penalty += t[j] * t[j];
        return loss + 0.5 * kOracleRidge * penalty;
    };

    OracleModel model;
    double current = objective(theta);
    model.objective_trace.push_back(current);
    std::vector<double> gradient(dim), step(dim);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        compute_margins(theta);
        for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(margin[i]);
        std::fill(gradient.begin(), gradient.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double residual = prob[i] - static_cast<double>(y[i]);
            for (std::size_t j = 0; j < d; ++j) gradient[j] += residual * Z(i, j);
            gradient[d] += residual;
        }
        for (auto& g : gradient) g /= static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) gradient[j] += kOracleRidge * theta[j];

        double gnorm = 0.0;
        for (const auto g : gradient) gnorm = std::max(gnorm, std::abs(g));
        model.final_gradient_norm = gnorm;
        if (gnorm <= tol) {
            model.converged = true;
            break;
        }

        std::vector<double> hessian(dim * dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = prob[i] * (1.0 - prob[i]);
            for (std::size_t a = 0; a < d; ++a) {
                const double za = Z(i, a) * s;
                for (std::size_t b = a; b < d; ++b) hessian[a * dim + b] += za * Z(i, b);
                hessian[a * dim + d] += za;
            }
            hessian[d * dim + d] += s;
        }
        for (std::size_t a = 0; a < dim; ++a) {
            for (std::size_t b = a; b < dim; ++b) {
                double v = hessian[a * dim + b] / static_cast<double>(n);
                if (a == b && a < d) v += kOracleRidge;
                hessian[a * dim + b] = v;
                hessian[b * dim + a] = v;
            }
        }

        bool have_step = false;
        try {
            step = detail::cholesky_solve(hessian, gradient, dim);
            have_step = true;
        } catch (const Error&) {
            model.newton_fallback = true;
        }
        if (!have_step) step = gradient;

        // Step halving keeps the penalized objective non-increasing.
        double scale = 1.0;
        bool moved = false;
        std::vector<double> candidate(dim);
        for (int half = 0; half < 60; ++half) {
            for (std::size_t k = 0; k < dim; ++k) candidate[k] = theta[k] - scale * step[k];
            const double value = objective(candidate);
            if (value <= current) {
                theta = candidate;
                current = value;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        model.objective_trace.push_back(current);
        if (!moved) break;  // numerical floor reached
    }

    if (!model.converged) {
        // Account for the final iterate.
        compute_margins(theta);
        for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(margin[i]);
        std::vector<double> g(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double residual = prob[i] - static_cast<double>(y[i]);
            for (std::size_t j = 0; j < d; ++j) g[j] += residual * Z(i, j);
            g[d] += residual;
        }
        for (auto& v : g) v /= static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) g[j] += kOracleRidge * theta[j];
        double gnorm = 0.0;
        for (const auto v : g) gnorm = std::max(gnorm, std::abs(v));
        model.final_gradient_norm = gnorm;
        model.converged = gnorm <= tol;
    }

    model.weights.assign(d, 0.0);
    double intercept = theta[d];
    for (std::size_t j = 0; j < d; ++j) {
        model.weights[j] = theta[j] / std_info.scale[j];
        intercept -= theta[j] * std_info.mean[j] / std_info.scale[j];
    }
    model.intercept = intercept;
    return model;
}

inline OracleModel fit_logistic(const Dataset& train, double tol = 1e-8,
                                std::size_t max_iter = 100) {
    return fit_logistic(train.features, train.labels, tol, max_iter);
}

inline std::vector<double> ground_truth_probs(const OracleModel& model, const Matrix& X) {
    require(X.cols() == model.weights.size(), ErrorCode::dimension_mismatch,
            "feature matrix has " + std::to_string(X.cols()) + " columns, oracle expects " +
                std::to_string(model.weights.size()));
    std::vector<double> probs(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        double z = model.intercept;
        for (std::size_t j = 0; j < X.cols(); ++j) z += model.weights[j] * X(i, j);
        probs[i] = sigmoid(z);
    }
    return probs;
}

// Fresh Bernoulli(p_star[i]) labels; deterministic per seed.
inline std::vector<int> redraw_labels(const std::vector<double>& p_star, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> labels(p_star.size());
    for (std::size_t i = 0; i < p_star.size(); ++i) {
        require(p_star[i] >= 0.0 && p_star[i] <= 1.0, ErrorCode::invalid_probability,
                "ground-truth probabilities must lie in [0,1]");
        labels[i] = rng.bernoulli(p_star[i]) ? 1 : 0;
    }
    return labels;
}

// --- decomposition validation ---------------------------------------------------

struct ValidationPoint {
    std::size_t point_id = 0;
    Decomposition decomposition;
};

struct ValidationReport {
    std::vector<ValidationPoint> points;
    double correlation = 0.0;            // estimated vs simulated totals
    double median_relative_error = 0.0;  // |estimated - simulated| / simulated
    std::size_t realizations = 0;
    std::uint64_t seed = 0;
    OracleModel oracle;
};

inline double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), ErrorCode::length_mismatch,
            "correlation inputs must align");
    require(a.size() >= 2, ErrorCode::insufficient_realizations,
            "correlation needs at least 2 points");
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    const double denom = std::sqrt(saa * sbb);
    return denom > 0.0 ? sab / denom : 0.0;
}

inline double median_of_sorted_copy(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline double relative_error(double estimated, double simulated) {
    if (simulated == 0.0) {
        return estimated == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return std::abs(estimated - simulated) / simulated;
}

// Nested Monte Carlo check of the variance decomposition. An oracle fitted on
// the base data supplies ground-truth probabilities; realization r refits a
// tree on labels redrawn with substream (seed, r). For every eval point the
// plug-in leaf term and the variance of conditional means are compared with
// the directly simulated prediction variance. The conditional mean of a
// realization is the oracle-probability average over the training rows of the
// leaf the point lands in.
inline ValidationReport validate_decomposition(const Dataset& base, std::size_t realizations,
                                               const TreeParams& params,
                                               const Matrix& eval_points, std::uint64_t seed) {
    require(realizations >= 2, ErrorCode::insufficient_replications,
            "need at least 2 realizations");
    require(eval_points.rows() >= 1, ErrorCode::empty_eval_set,
            "need at least one evaluation point");

    ValidationReport report;
    report.realizations = realizations;
    report.seed = seed;
    report.oracle = fit_logistic(base);
    const std::vector<double> p_star = ground_truth_probs(report.oracle, base.features);

    const std::size_t points = eval_points.rows();
    std::vector<std::vector<double>> cond_means;
    const auto records =
        resampled_records(base.features, base.labels, p_star, ResampleMode::label_redraw,
                          eval_points, realizations, params, seed, &cond_means);

    std::vector<double> estimated(points), simulated(points), errors(points);
    report.points.reserve(points);
    for (std::size_t e = 0; e < points; ++e) {
        ValidationPoint point;
        point.point_id = e;
        point.decomposition = decompose_variance(records[e], cond_means[e]);
        estimated[e] = point.decomposition.total_estimated;
        simulated[e] = point.decomposition.total_simulated;
        errors[e] = relative_error(estimated[e], simulated[e]);
        report.points.push_back(point);
    }
    report.correlation = pearson_correlation(estimated, simulated);
    report.median_relative_error = median_of_sorted_copy(errors);
    return report;
}

// --- leaf-size sweep -------------------------------------------------------------

struct SweepReport {
    std::vector<std::size_t> grid;
    std::vector<double> mean_leaf_regret;  // held-out plug-in average
    std::vector<double> mean_log_loss;     // held-out log loss
    std::size_t realizations = 0;
    std::size_t max_depth = 0;
    std::uint64_t seed = 0;
};

// Regret/loss trade-off as min_leaf grows, averaged over label redraws. Only
// min_leaf moves; depth stays fixed. Data is split once; the oracle is fitted
// on the training part, realization r refits on redrawn training labels, and
// both metrics are taken on the untouched held-out part.
inline SweepReport leaf_size_sweep(const Dataset& base, const std::vector<std::size_t>& grid,
                                   std::size_t realizations, std::uint64_t seed,
                                   std::size_t max_depth = 12, double test_fraction = 0.3,
                                   double min_impurity_decrease = 0.0) {
    require(!grid.empty(), ErrorCode::empty_grid, "sweep grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        require(grid[i] > grid[i - 1], ErrorCode::invalid_argument,
                "sweep grid must be strictly increasing");
    }
    require(grid.back() <= base.n(), ErrorCode::min_leaf_exceeds_data,
            "largest grid value exceeds dataset size");

    const auto idx = split_indices(base.n(), test_fraction, substream_seed(seed, 0));
    const Dataset train = subset(base, idx.train);
    const Dataset test = subset(base, idx.test);
    require(grid.back() <= train.n(), ErrorCode::min_leaf_exceeds_data,
            "largest grid value exceeds the training partition");

    const OracleModel oracle = fit_logistic(train);
    const std::vector<double> p_train = ground_truth_probs(oracle, train.features);

    Matrix regret_cells(realizations, grid.size());
    Matrix loss_cells(realizations, grid.size());
    parallel_for(realizations, [&](std::size_t r) {
        Rng rng = Rng::substream(seed, r + 1);
        std::vector<int> y_train(train.n());
        for (std::size_t i = 0; i < train.n(); ++i) {
            y_train[i] = rng.bernoulli(p_train[i]) ? 1 : 0;
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            TreeParams params;
            params.min_leaf = grid[g];
            params.max_depth = max_depth;
            params.min_impurity_decrease = min_impurity_decrease;
            const Tree tree = fit_tree(train.features, y_train, params);
            double regret_sum = 0.0;
            for (std::size_t e = 0; e < test.n(); ++e) {
                const auto& leaf = tree.leaf(tree.route(test.features.row(e)));
                regret_sum += leaf_regret_plugin(leaf.p_hat, leaf.n_samples);
            }
            regret_cells(r, g) = regret_sum / static_cast<double>(test.n());
            loss_cells(r, g) = log_loss(tree, test.features, test.labels);
        }
    });

    SweepReport report;
    report.grid = grid;
    report.realizations = realizations;
    report.max_depth = max_depth;
    report.seed = seed;
    report.mean_leaf_regret.assign(grid.size(), 0.0);
    report.mean_log_loss.assign(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        for (std::size_t r = 0; r < realizations; ++r) {
            report.mean_leaf_regret[g] += regret_cells(r, g);
            report.mean_log_loss[g] += loss_cells(r, g);
        }
        report.mean_leaf_regret[g] /= static_cast<double>(realizations);
        report.mean_log_loss[g] /= static_cast<double>(realizations);
    }
    return report;
}

}  // namespace regret_tree
