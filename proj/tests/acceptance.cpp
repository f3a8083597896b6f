// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Each criterion pins its tolerances and seeds in code.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "regret_tree/dataset.hpp"
#include "regret_tree/error.hpp"
#include "regret_tree/oracle.hpp"
#include "regret_tree/regret.hpp"
#include "regret_tree/report.hpp"
#include "regret_tree/selective.hpp"
#include "regret_tree/tree.hpp"

namespace rt = regret_tree;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d. %s: %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double draw_leaf_mean(double p, std::size_t n, rt::Rng& rng) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < n; ++i) ones += rng.bernoulli(p) ? 1u : 0u;
    return static_cast<double>(ones) / static_cast<double>(n);
}

// --- 1. decomposition identity ------------------------------------------------

void criterion_decomposition_identity() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<double> weights = {6.0, -3.96, 3.18, -2.4, 1.62};
    const auto synth = rt::make_synthetic(2000, 5, weights, 0.0, 17u);
    const auto [train, test] = rt::train_test_split(synth.dataset, 0.3, 31u);
    std::vector<std::size_t> pick;
    for (std::size_t i = 0; i < 50; ++i) pick.push_back(i * (test.n() / 50));
    const rt::Matrix eval = test.features.take_rows(pick);
    const auto report_out = rt::validate_decomposition(
        train, 200, {.min_leaf = 40, .max_depth = 8}, eval, 97u);
    const double elapsed = seconds_since(start);
    const bool pass = report_out.correlation >= 0.95 &&
                      report_out.median_relative_error <= 0.15 && elapsed <= 300.0;
    report(1, "decomposition identity",
           pass,
           "correlation=" + fmt(report_out.correlation) + " (>=0.95), median_rel_error=" +
               fmt(report_out.median_relative_error) + " (<=0.15), elapsed=" + fmt(elapsed) +
               "s (<=300s), R=200, points=50");
}

// --- 2. uniform bound ----------------------------------------------------------

void criterion_uniform_bound() {
    const auto start = std::chrono::steady_clock::now();
    rt::Rng rng(20260808u);
    std::size_t violations = 0;
    for (int i = 0; i < 10000; ++i) {
        const double p = rng.next_double();
        const std::size_t n = 1 + rng.next_below(1000000);
        if (rt::leaf_regret_true(p, n) > rt::leaf_regret_bound(n)) ++violations;
    }
    const double elapsed = seconds_since(start);
    const bool pass = violations == 0 && elapsed < 1.0;
    report(2, "uniform bound p(1-p)/n <= 1/(4n)", pass,
           std::to_string(violations) + " violations in 10000 pairs (need 0), elapsed=" +
               fmt(elapsed) + "s (<1s)");
}

// --- 3. plug-in consistency ------------------------------------------------------

void criterion_plugin_consistency() {
    const double p = 0.3;
    const std::vector<std::size_t> sizes = {100, 10000, 1000000};
    int monotone = 0;
    int exact_hits = 0;  // plug-in equal to the closed form, error exactly 0
    for (int trial = 0; trial < 100; ++trial) {
        rt::Rng rng = rt::Rng::substream(3033u, static_cast<std::uint64_t>(trial));
        std::vector<double> errors;
        bool hit = false;
        for (const auto n : sizes) {
            const double plugin = rt::leaf_regret_plugin(draw_leaf_mean(p, n, rng), n);
            const double err = std::abs(plugin - rt::leaf_regret_true(p, n));
            if (err == 0.0) hit = true;
            errors.push_back(err);
        }
        const bool decreasing = errors[1] < errors[0] && errors[2] < errors[1];
        if (decreasing) ++monotone;
        if (!decreasing && hit) ++exact_hits;
    }
    const bool pass = monotone >= 95;
    // At p=0.3, n=100 the empirical mean lands on p exactly with probability
    // ~8.7%; a zero error at the small size cannot strictly decrease further,
    // which caps the expected pass rate near 90/100.
    report(3, "plug-in consistency over growing leaves", pass,
           std::to_string(monotone) + "/100 trials strictly decreasing (need >=95); " +
               std::to_string(exact_hits) +
               " non-monotone trials had the plug-in hit the closed form exactly "
               "(error 0 at a smaller size), " +
               std::to_string(100 - monotone - exact_hits) + " failed otherwise");
}

// --- 4. deviation inequality ------------------------------------------------------

void criterion_deviation_inequality() {
    const double p = 0.4;
    const int redraws = 10000;
    bool pass = true;
    std::string detail;
    for (const std::size_t n : {50u, 200u}) {
        for (const double eps : {0.05, 0.1}) {
            rt::Rng rng = rt::Rng::substream(4044u, n * 10 + static_cast<std::size_t>(eps * 100));
            int exceed = 0;
            for (int i = 0; i < redraws; ++i) {
                if (std::abs(draw_leaf_mean(p, n, rng) - p) > eps) ++exceed;
            }
            const double freq = static_cast<double>(exceed) / redraws;
            const double envelope = 2.0 * std::exp(-2.0 * static_cast<double>(n) * eps * eps);
            const double slack = 3.0 * std::sqrt(freq * (1.0 - freq) / redraws);
            if (freq > envelope + slack) pass = false;
            detail += "(n=" + std::to_string(n) + ",eps=" + fmt(eps) + ": " + fmt(freq) +
                      "<=" + fmt(envelope + slack) + ") ";
        }
    }
    report(4, "deviation inequality envelope", pass, detail);
}

// --- 5. two-stage Monte Carlo convergence ----------------------------------------

void criterion_two_stage_convergence() {
    const double truth = rt::leaf_regret_true(0.3, 10000);  // 2.1e-5
    rt::Rng rng(5055u);
    const double p_hat = draw_leaf_mean(0.3, 10000, rng);
    const double mc = rt::mc_leaf_regret(p_hat, 10000, 10000, 5056u);
    const double rel = std::abs(mc - truth) / truth;
    const bool pass = rel <= 0.05;
    report(5, "two-stage Monte Carlo convergence", pass,
           "mc=" + fmt(mc) + " vs true=" + fmt(truth) + ", rel_error=" + fmt(rel) +
               " (<=0.05)");
}

// --- 6. leaf-size trade-off --------------------------------------------------------

void criterion_leaf_size_tradeoff() {
    const auto synth = rt::make_synthetic(4200, 2, {400.0, 300.0}, 0.0, 21u);
    const auto sweep =
        rt::leaf_size_sweep(synth.dataset, {5, 10, 20, 50, 100, 200}, 50, 78u, 12, 0.4);
    bool decreasing = true;
    for (std::size_t g = 1; g < sweep.grid.size(); ++g) {
        if (!(sweep.mean_leaf_regret[g] < sweep.mean_leaf_regret[g - 1])) decreasing = false;
    }
    const bool loss_rises = sweep.mean_log_loss.back() > sweep.mean_log_loss.front();
    const bool pass = decreasing && loss_rises;
    report(6, "leaf-size trade-off", pass,
           std::string("regret strictly decreasing=") + (decreasing ? "yes" : "no") +
               ", loss(200)=" + fmt(sweep.mean_log_loss.back()) + " > loss(5)=" +
               fmt(sweep.mean_log_loss.front()) + " is " + (loss_rises ? "yes" : "no"));
}

// --- 7. structural dominance --------------------------------------------------------

struct BenchmarkSpec {
    std::string name;
    std::size_t n, d, min_leaf, depth;
    double scale;
};

void criterion_structural_dominance() {
    const std::vector<BenchmarkSpec> benchmarks = {
        {"bench_a", 2000, 5, 20, 8, 6.0},
        {"bench_b", 2500, 3, 30, 8, 4.0},
        {"bench_c", 1600, 2, 25, 10, 8.0},
    };
    const double basis[5] = {1.0, -0.66, 0.53, -0.4, 0.27};
    bool pass = true;
    std::string detail;
    for (const auto& spec : benchmarks) {
        std::vector<double> weights(spec.d);
        for (std::size_t j = 0; j < spec.d; ++j) weights[j] = spec.scale * basis[j % 5];
        const auto synth = rt::make_synthetic(spec.n, spec.d, weights, 0.0, 7077u);
        const auto [train, test] = rt::train_test_split(synth.dataset, 0.3, 7078u);
        std::vector<std::size_t> pick;
        for (std::size_t i = 0; i < 50; ++i) pick.push_back(i * (test.n() / 50));
        const rt::Matrix eval = test.features.take_rows(pick);
        const auto validation = rt::validate_decomposition(
            train, 200, {.min_leaf = spec.min_leaf, .max_depth = spec.depth}, eval, 7079u);
        double leaf = 0.0, structural = 0.0;
        for (const auto& p : validation.points) {
            leaf += p.decomposition.expected_leaf;
            structural += p.decomposition.structural;
        }
        const double ratio = structural / leaf;
        if (!(ratio > 1.0)) pass = false;
        detail += spec.name + " ratio=" + fmt(ratio) + " ";
    }
    report(7, "structural regret dominance (ratio > 1 on 3 benchmarks)", pass, detail);
}

// --- 8. selective prediction safety ---------------------------------------------------

void criterion_selective_safety() {
    // Stable cluster: 100 rows near -3, all positive, correctly classified.
    // Unstable cluster: 100 rows near +3 with 40% positives, classified
    // negative, so its positives are missed at full coverage.
    const std::size_t half = 100;
    rt::Matrix X(2 * half, 1);
    std::vector<int> y(2 * half);
    rt::Rng rng(8088u);
    for (std::size_t i = 0; i < half; ++i) {
        X(i, 0) = -3.0 + 0.2 * rng.next_double();
        y[i] = 1;
        X(half + i, 0) = 3.0 + 0.2 * rng.next_double();
        y[half + i] = (i % 5 < 2) ? 1 : 0;  // 40 positives
    }
    const rt::Dataset data{X, y, {}};
    const rt::TreeParams params{.min_leaf = 60, .max_depth = 8};
    const rt::Tree tree = rt::fit_tree(data, params);

    std::vector<int> predictions(data.n());
    std::vector<double> leaf_scores(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto& leaf = tree.leaf(tree.route(X.row(i)));
        predictions[i] = leaf.p_hat >= 0.5 ? 1 : 0;
        leaf_scores[i] = rt::leaf_regret_plugin(leaf.p_hat, leaf.n_samples);
    }
    const std::vector<double> structural_scores =
        rt::mc_structural_regret_batch(data, X, 200, params, 8089u);
    const auto scores = rt::make_regret_scores(leaf_scores, structural_scores);

    const std::vector<double> grid = {1.0, 0.5};
    const auto total_curve =
        rt::recall_coverage_curve(predictions, y, scores, rt::RankStrategy::total, grid);
    const auto leaf_curve =
        rt::recall_coverage_curve(predictions, y, scores, rt::RankStrategy::leaf, grid);
    const auto structural_curve =
        rt::recall_coverage_curve(predictions, y, scores, rt::RankStrategy::structural, grid);

    const auto full = total_curve.points[0].recall;
    const auto at_half = total_curve.points[1].recall;
    const bool pass = full && at_half && *at_half == 1.0 && *full < 1.0 &&
                      leaf_curve.points[0].recall == full &&
                      structural_curve.points[0].recall == full;
    report(8, "selective prediction safety", pass,
           "recall@1.0=" + (full ? fmt(*full) : std::string("undef")) + " (<1), recall@0.5=" +
               (at_half ? fmt(*at_half) : std::string("undef")) +
               " (=1), curves start equal=" +
               ((leaf_curve.points[0].recall == full &&
                 structural_curve.points[0].recall == full)
                    ? "yes"
                    : "no"));
}

// --- 9. CLI determinism -----------------------------------------------------------------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_cli_determinism() {
    const char* cli = std::getenv("REGRET_TREE_CLI");
    if (cli == nullptr) {
        report(9, "CLI determinism", false, "REGRET_TREE_CLI not set");
        return;
    }
    const fs::path dir =
        fs::temp_directory_path() / ("regret_tree_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    {
        std::ofstream config(dir / "config.json");
        config << R"({
  "seed": 2026, "out_dir": "out", "test_fraction": 0.3, "eval_points": 10,
  "replications": {"R": 20, "B": 20},
  "tree": {"min_leaf": 15, "max_depth": 6},
  "sweep": {"grid": [10, 40, 120], "max_depth": 8},
  "coverage_grid": {"start": 1.0, "stop": 0.2, "step": 0.2},
  "dataset": {"name": "demo", "synthetic": {
    "n": 500, "d": 2, "weights": [1.5, -1.0], "intercept": 0.0, "seed": 5}}
})";
    }
    bool pass = true;
    std::string detail;
    for (const std::string command : {"validate", "sweep", "table", "selective"}) {
        std::size_t compared = 0;
        for (const auto& [threads, out] :
             std::vector<std::pair<std::string, std::string>>{{"1", "out_a"}, {"2", "out_b"}}) {
            const std::string shell = "cd " + dir.string() + " && REGRET_TREE_THREADS=" +
                                      threads + " \"" + cli + "\" " + command +
                                      " --config config.json --out " + out +
                                      " > /dev/null 2>&1";
            const int raw = std::system(shell.c_str());
            if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) pass = false;
        }
        if (fs::exists(dir / "out_a")) {
            for (const auto& entry : fs::directory_iterator(dir / "out_a")) {
                if (entry.path().extension() != ".csv") continue;
                const auto sibling = dir / "out_b" / entry.path().filename();
                if (!fs::exists(sibling) || slurp(entry.path()) != slurp(sibling)) {
                    pass = false;
                } else {
                    ++compared;
                }
            }
        } else {
            pass = false;
        }
        detail += command + ":" + std::to_string(compared) + "csv ";
        fs::remove_all(dir / "out_a");
        fs::remove_all(dir / "out_b");
    }
    fs::remove_all(dir);
    report(9, "CLI determinism across reruns and thread counts", pass,
           detail + (pass ? "all byte-identical" : "mismatch or run failure"));
}

// --- 10. greedy split oracle equivalence ---------------------------------------------------

namespace ref {

double gini(std::size_t pos, std::size_t total) {
    const double p = static_cast<double>(pos) / static_cast<double>(total);
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double decrease = 0.0;
};

Split best_split(const rt::Matrix& X, const std::vector<int>& y,
                 const std::vector<std::size_t>& rows, std::size_t min_leaf) {
    Split best;
    const std::size_t n = rows.size();
    std::size_t parent_pos = 0;
    for (const auto r : rows) parent_pos += static_cast<std::size_t>(y[r]);
    const double parent = gini(parent_pos, n);
    for (std::size_t f = 0; f < X.cols(); ++f) {
        std::vector<double> values;
        for (const auto r : rows) values.push_back(X(r, f));
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t k = 0; k + 1 < values.size(); ++k) {
            const double threshold = values[k] + 0.5 * (values[k + 1] - values[k]);
            std::size_t ln = 0, lp = 0, rn = 0, rp = 0;
            for (const auto r : rows) {
                if (X(r, f) <= threshold) {
                    ++ln;
                    lp += static_cast<std::size_t>(y[r]);
                } else {
                    ++rn;
                    rp += static_cast<std::size_t>(y[r]);
                }
            }
            if (ln < min_leaf || rn < min_leaf) continue;
            const double decrease = parent -
                                    (static_cast<double>(ln) / n) * gini(lp, ln) -
                                    (static_cast<double>(rn) / n) * gini(rp, rn);
            if (!best.found || decrease > best.decrease) best = {true, f, threshold, decrease};
        }
    }
    return best;
}

struct Node {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    double p_hat = 0.0;
    std::size_t n = 0;
    std::vector<Node> children;
};

Node fit(const rt::Matrix& X, const std::vector<int>& y, const std::vector<std::size_t>& rows,
         std::size_t depth, const rt::TreeParams& params) {
    Node node;
    node.n = rows.size();
    std::size_t pos = 0;
    for (const auto r : rows) pos += static_cast<std::size_t>(y[r]);
    node.p_hat = static_cast<double>(pos) / static_cast<double>(rows.size());
    if (pos == 0 || pos == rows.size() || depth >= params.max_depth) return node;
    const Split split = best_split(X, y, rows, params.min_leaf);
    if (!split.found || split.decrease < params.min_impurity_decrease) return node;
    node.leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    std::vector<std::size_t> left, right;
    for (const auto r : rows) {
        (X(r, split.feature) <= split.threshold ? left : right).push_back(r);
    }
    node.children.push_back(fit(X, y, left, depth + 1, params));
    node.children.push_back(fit(X, y, right, depth + 1, params));
    return node;
}

bool matches(const rt::Tree& tree, std::size_t node_idx, const Node& reference) {
    const auto& node = tree.nodes()[node_idx];
    if (reference.leaf != node.is_leaf()) return false;
    if (node.is_leaf()) return node.n_samples == reference.n && node.p_hat == reference.p_hat;
    if (static_cast<std::size_t>(node.feature) != reference.feature) return false;
    if (node.threshold != reference.threshold) return false;
    return matches(tree, static_cast<std::size_t>(node.left), reference.children[0]) &&
           matches(tree, static_cast<std::size_t>(node.right), reference.children[1]);
}

}  // namespace ref

void criterion_split_oracle_equivalence() {
    rt::Rng rng(10100u);
    int agreements = 0;
    const int total = 200;
    for (int trial = 0; trial < total; ++trial) {
        const std::size_t n = 3 + rng.next_below(6);  // at most 8 rows
        const std::size_t d = 1 + rng.next_below(2);  // at most 2 features
        rt::Matrix X(n, d);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                X(i, j) = static_cast<double>(rng.next_below(6));
            }
            y[i] = rng.bernoulli(0.5) ? 1 : 0;
        }
        const rt::TreeParams params{.min_leaf = 1, .max_depth = 4};
        const auto tree = rt::fit_tree(X, y, params);
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        if (ref::matches(tree, 0, ref::fit(X, y, rows, 0, params))) ++agreements;
    }
    const bool pass = agreements == total;
    report(10, "greedy split matches exhaustive search", pass,
           std::to_string(agreements) + "/" + std::to_string(total) + " trees identical");
}

}  // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    criterion_decomposition_identity();
    criterion_uniform_bound();
    criterion_plugin_consistency();
    criterion_deviation_inequality();
    criterion_two_stage_convergence();
    criterion_leaf_size_tradeoff();
    criterion_structural_dominance();
    criterion_selective_safety();
    criterion_cli_determinism();
    criterion_split_oracle_equivalence();
    std::printf("%d/10 criteria passed (%.1fs total)\n", 10 - failures,
                seconds_since(start));
    return failures;
}
