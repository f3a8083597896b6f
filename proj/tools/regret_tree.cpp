// Experiment driver: reproduces the decomposition validation, leaf-size
// sweep, benchmark regret table, and selective-prediction study from a JSON
// config. Every command is deterministic given (config, seed) and its CSV
// outputs are byte-identical across reruns and thread counts.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "regret_tree/dataset.hpp"
#include "regret_tree/error.hpp"
#include "regret_tree/oracle.hpp"
#include "regret_tree/regret.hpp"
#include "regret_tree/report.hpp"
#include "regret_tree/selective.hpp"
#include "regret_tree/svg.hpp"
#include "regret_tree/tree.hpp"

namespace rt = regret_tree;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SyntheticSpec {
    std::size_t n = 2000;
    std::size_t d = 5;
    std::vector<double> weights;
    double intercept = 0.0;
    std::uint64_t seed = 1;
};

struct DatasetSpec {
    std::string name = "synthetic";
    std::optional<SyntheticSpec> synthetic;
    std::string csv_path;
    std::string schema_path;
};

struct RunConfig {
    DatasetSpec dataset;
    std::vector<DatasetSpec> datasets;  // table command; defaults to {dataset}
    rt::TreeParams tree;
    std::size_t realizations = 200;            // label-redraw count R
    std::size_t bootstrap_replications = 100;  // bootstrap count B
    std::uint64_t seed = 42;
    double test_fraction = 0.3;
    std::size_t eval_points = 50;
    std::vector<std::size_t> sweep_grid = {5, 10, 20, 50, 100, 200};
    std::size_t sweep_max_depth = 12;
    std::vector<double> coverage_grid = rt::default_coverage_grid();
    rt::ResampleMode resample = rt::ResampleMode::label_redraw;
    std::string out_dir = "out";
};

struct FlagOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replications;
    std::optional<std::size_t> min_leaf;
    std::optional<std::size_t> max_depth;
    std::optional<std::string> out_dir;
    std::optional<std::string> resample;
    std::optional<std::string> schema;
};

// Seed purposes (substream indices off the master seed).
constexpr std::uint64_t kSplitPurpose = 101;
constexpr std::uint64_t kEvalPickPurpose = 102;
constexpr std::uint64_t kStudyPurpose = 103;

DatasetSpec parse_dataset_spec(const json& j) {
    DatasetSpec spec;
    if (j.contains("name")) spec.name = j.at("name").get<std::string>();
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        SyntheticSpec syn;
        syn.n = s.at("n").get<std::size_t>();
        syn.d = s.at("d").get<std::size_t>();
        syn.weights = s.at("weights").get<std::vector<double>>();
        if (s.contains("intercept")) syn.intercept = s.at("intercept").get<double>();
        if (s.contains("seed")) syn.seed = s.at("seed").get<std::uint64_t>();
        spec.synthetic = std::move(syn);
    } else if (j.contains("csv")) {
        spec.csv_path = j.at("csv").get<std::string>();
        if (!j.contains("schema")) {
            throw ConfigError("dataset '" + spec.name + "' names a csv but no schema file");
        }
        spec.schema_path = j.at("schema").get<std::string>();
        if (!fs::exists(spec.csv_path)) {
            throw ConfigError("csv file does not exist: " + spec.csv_path);
        }
        if (!fs::exists(spec.schema_path)) {
            throw ConfigError("schema file does not exist: " + spec.schema_path);
        }
    } else {
        throw ConfigError("dataset entry needs either 'synthetic' or 'csv'+'schema'");
    }
    return spec;
}

rt::ResampleMode parse_resample(const std::string& value) {
    if (value == "bootstrap") return rt::ResampleMode::bootstrap;
    if (value == "label-redraw") return rt::ResampleMode::label_redraw;
    throw ConfigError("resample must be 'bootstrap' or 'label-redraw', got '" + value + "'");
}

RunConfig load_config(const std::string& path, const FlagOverrides& flags) {
    if (!fs::exists(path)) throw ConfigError("config file does not exist: " + path);
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }

    RunConfig config;
    try {
        if (!j.contains("dataset") && !j.contains("datasets")) {
            throw ConfigError("config needs a 'dataset' (or 'datasets') entry");
        }
        if (j.contains("dataset")) config.dataset = parse_dataset_spec(j.at("dataset"));
        if (j.contains("datasets")) {
            for (const auto& entry : j.at("datasets")) {
                config.datasets.push_back(parse_dataset_spec(entry));
            }
            if (!j.contains("dataset")) config.dataset = config.datasets.front();
        }
        if (config.datasets.empty()) config.datasets.push_back(config.dataset);

        if (j.contains("tree")) {
            const auto& t = j.at("tree");
            if (t.contains("min_leaf")) config.tree.min_leaf = t.at("min_leaf").get<std::size_t>();
            if (t.contains("max_depth")) {
                config.tree.max_depth = t.at("max_depth").get<std::size_t>();
            }
            if (t.contains("min_impurity_decrease")) {
                config.tree.min_impurity_decrease = t.at("min_impurity_decrease").get<double>();
            }
        }
        if (j.contains("replications")) {
            const auto& r = j.at("replications");
            if (r.is_number()) {
                config.realizations = r.get<std::size_t>();
            } else {
                if (r.contains("R")) config.realizations = r.at("R").get<std::size_t>();
                if (r.contains("B")) {
                    config.bootstrap_replications = r.at("B").get<std::size_t>();
                }
            }
        }
        if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("test_fraction")) config.test_fraction = j.at("test_fraction").get<double>();
        if (j.contains("eval_points")) config.eval_points = j.at("eval_points").get<std::size_t>();
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            if (s.contains("grid")) config.sweep_grid = s.at("grid").get<std::vector<std::size_t>>();
            if (s.contains("max_depth")) {
                config.sweep_max_depth = s.at("max_depth").get<std::size_t>();
            }
        }
        if (j.contains("coverage_grid")) {
            const auto& g = j.at("coverage_grid");
            if (g.is_array()) {
                config.coverage_grid = g.get<std::vector<double>>();
            } else {
                const double start = g.value("start", 1.0);
                const double stop = g.value("stop", 0.1);
                const double step = g.value("step", 0.05);
                if (step <= 0.0 || stop > start) {
                    throw ConfigError("coverage_grid needs start >= stop and step > 0");
                }
                config.coverage_grid.clear();
                for (double c = start; c > stop - 1e-9; c -= step) {
                    config.coverage_grid.push_back(c);
                }
            }
        }
        if (j.contains("resample")) {
            config.resample = parse_resample(j.at("resample").get<std::string>());
        }
        if (j.contains("out_dir")) config.out_dir = j.at("out_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is malformed: " + e.what());
    }

    if (flags.seed) config.seed = *flags.seed;
    if (flags.replications) {
        config.realizations = *flags.replications;
        config.bootstrap_replications = *flags.replications;
    }
    if (flags.min_leaf) config.tree.min_leaf = *flags.min_leaf;
    if (flags.max_depth) config.tree.max_depth = *flags.max_depth;
    if (flags.out_dir) config.out_dir = *flags.out_dir;
    if (flags.resample) config.resample = parse_resample(*flags.resample);
    if (flags.schema) {
        if (!fs::exists(*flags.schema)) {
            throw ConfigError("schema file does not exist: " + *flags.schema);
        }
        if (config.dataset.csv_path.empty()) {
            throw ConfigError("--schema only applies to csv datasets");
        }
        config.dataset.schema_path = *flags.schema;
        for (auto& spec : config.datasets) {
            if (!spec.csv_path.empty()) spec.schema_path = *flags.schema;
        }
    }

    if (config.seed == 0) throw ConfigError("seed must be positive");
    if (config.realizations < 2) throw ConfigError("replications must be >= 2");
    if (config.test_fraction <= 0.0 || config.test_fraction >= 1.0) {
        throw ConfigError("test_fraction must lie in (0,1)");
    }
    if (config.eval_points < 2) throw ConfigError("eval_points must be >= 2");
    return config;
}

rt::Dataset build_dataset(const DatasetSpec& spec) {
    if (spec.synthetic) {
        const auto& s = *spec.synthetic;
        return rt::make_synthetic(s.n, s.d, s.weights, s.intercept, s.seed).dataset;
    }
    const auto schema = rt::load_schema(spec.schema_path);
    return rt::load_csv(spec.csv_path, schema);
}

// Seeded subsample of test rows used as evaluation points.
rt::Matrix pick_eval_points(const rt::Dataset& test, std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> order(test.n());
    std::iota(order.begin(), order.end(), 0);
    rt::Rng rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t j = rng.next_below(i + 1);
        std::swap(order[i], order[j]);
    }
    const std::size_t keep = std::min(count, order.size());
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return test.features.take_rows(order);
}

void write_outputs(const std::string& out_dir,
                   const std::vector<std::pair<std::string, std::string>>& files) {
    fs::create_directories(out_dir);
    for (const auto& [name, content] : files) {
        rt::write_text_file((fs::path(out_dir) / name).string(), content);
    }
}

// --- commands ----------------------------------------------------------------

int cmd_validate(const RunConfig& config) {
    const rt::Dataset base = build_dataset(config.dataset);
    const auto idx = rt::split_indices(base.n(), config.test_fraction,
                                       rt::substream_seed(config.seed, kSplitPurpose));
    const rt::Dataset train = rt::subset(base, idx.train);
    const rt::Dataset test = rt::subset(base, idx.test);
    const rt::Matrix eval_points = pick_eval_points(
        test, config.eval_points, rt::substream_seed(config.seed, kEvalPickPurpose));

    const rt::ValidationReport report =
        rt::validate_decomposition(train, config.realizations, config.tree, eval_points,
                                   rt::substream_seed(config.seed, kStudyPurpose));

    write_outputs(config.out_dir,
                  {{"decomposition.csv", rt::validation_csv(report)},
                   {"decomposition.json", rt::validation_json(report).dump(2) + "\n"},
                   {"fig1.svg", rt::validation_svg(report)}});
    std::cout << "correlation=" << rt::fmt_double(report.correlation)
              << " median_relative_error=" << rt::fmt_double(report.median_relative_error)
              << " points=" << report.points.size() << " R=" << report.realizations << "\n";
    return 0;
}

int cmd_sweep(const RunConfig& config) {
    const rt::Dataset base = build_dataset(config.dataset);
    const rt::SweepReport report = rt::leaf_size_sweep(
        base, config.sweep_grid, config.realizations,
        rt::substream_seed(config.seed, kStudyPurpose), config.sweep_max_depth,
        config.test_fraction, config.tree.min_impurity_decrease);

    write_outputs(config.out_dir, {{"sweep.csv", rt::sweep_csv(report)},
                                   {"sweep.json", rt::sweep_json(report).dump(2) + "\n"},
                                   {"fig2.svg", rt::sweep_svg(report)}});
    std::cout << "sweep points=" << report.grid.size() << " R=" << report.realizations
              << " regret[first]=" << rt::fmt_double(report.mean_leaf_regret.front())
              << " regret[last]=" << rt::fmt_double(report.mean_leaf_regret.back()) << "\n";
    return 0;
}

// Dataset-level means of the decomposition components over eval points.
rt::TableRow table_row_for(const DatasetSpec& spec, const RunConfig& config) {
    const rt::Dataset base = build_dataset(spec);
    const auto idx = rt::split_indices(base.n(), config.test_fraction,
                                       rt::substream_seed(config.seed, kSplitPurpose));
    const rt::Dataset train = rt::subset(base, idx.train);
    const rt::Dataset test = rt::subset(base, idx.test);
    const rt::Matrix eval_points = pick_eval_points(
        test, config.eval_points, rt::substream_seed(config.seed, kEvalPickPurpose));
    const std::uint64_t study_seed = rt::substream_seed(config.seed, kStudyPurpose);

    rt::TableRow row;
    row.dataset = spec.name;
    const std::size_t points = eval_points.rows();
    if (config.resample == rt::ResampleMode::label_redraw) {
        const rt::ValidationReport report = rt::validate_decomposition(
            train, config.realizations, config.tree, eval_points, study_seed);
        for (const auto& p : report.points) {
            row.leaf_regret += p.decomposition.expected_leaf;
            row.structural_regret += p.decomposition.structural;
        }
    } else {
        const auto records = rt::resampled_records(
            train.features, train.labels, {}, rt::ResampleMode::bootstrap, eval_points,
            config.bootstrap_replications, config.tree, study_seed);
        std::vector<double> predictions(config.bootstrap_replications);
        for (std::size_t e = 0; e < points; ++e) {
            double plugin_sum = 0.0;
            for (std::size_t b = 0; b < config.bootstrap_replications; ++b) {
                plugin_sum += rt::leaf_regret_plugin(records[e][b].p_hat, records[e][b].n_leaf);
                predictions[b] = records[e][b].prediction;
            }
            row.leaf_regret += plugin_sum / static_cast<double>(config.bootstrap_replications);
            row.structural_regret += rt::sample_variance(predictions);
        }
    }
    row.leaf_regret /= static_cast<double>(points);
    row.structural_regret /= static_cast<double>(points);
    return row;
}

int cmd_table(const RunConfig& config) {
    std::vector<rt::TableRow> rows;
    rows.reserve(config.datasets.size());
    for (const auto& spec : config.datasets) {
        rows.push_back(table_row_for(spec, config));
    }
    write_outputs(config.out_dir,
                  {{"table1.csv", rt::table_csv(rows)},
                   {"table1.json",
                    rt::table_json(rows, rt::to_string(config.resample)).dump(2) + "\n"}});
    for (const auto& row : rows) {
        std::cout << row.dataset << " leaf=" << rt::fmt_fixed(row.leaf_regret, 6)
                  << " structural=" << rt::fmt_fixed(row.structural_regret, 6)
                  << " ratio=" << rt::fmt_fixed(row.ratio(), 2) << "\n";
    }
    return 0;
}

int cmd_selective(const RunConfig& config) {
    const rt::Dataset base = build_dataset(config.dataset);
    const auto idx = rt::split_indices(base.n(), config.test_fraction,
                                       rt::substream_seed(config.seed, kSplitPurpose));
    const rt::Dataset train = rt::subset(base, idx.train);
    const rt::Dataset test = rt::subset(base, idx.test);
    const std::uint64_t study_seed = rt::substream_seed(config.seed, kStudyPurpose);

    const rt::Tree base_tree = rt::fit_tree(train, config.tree);
    const std::size_t n = test.n();
    std::vector<double> probabilities(n), leaf_scores(n);
    std::vector<int> leaf_ids(n), predictions(n);
    std::vector<std::size_t> leaf_sizes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int leaf_id = base_tree.route(test.features.row(i));
        const auto& leaf = base_tree.leaf(leaf_id);
        leaf_ids[i] = leaf_id;
        leaf_sizes[i] = leaf.n_samples;
        probabilities[i] = leaf.p_hat;
        predictions[i] = leaf.p_hat >= 0.5 ? 1 : 0;
        leaf_scores[i] = rt::leaf_regret_plugin(leaf.p_hat, leaf.n_samples);
    }

    std::vector<double> structural_scores(n);
    if (config.resample == rt::ResampleMode::bootstrap) {
        structural_scores = rt::mc_structural_regret_batch(
            train, test.features, config.bootstrap_replications, config.tree, study_seed);
    } else {
        const rt::OracleModel oracle = rt::fit_logistic(train);
        const std::vector<double> p_star = rt::ground_truth_probs(oracle, train.features);
        std::vector<std::vector<double>> cond_means;
        rt::resampled_records(train.features, train.labels, p_star,
                              rt::ResampleMode::label_redraw, test.features,
                              config.realizations, config.tree, study_seed, &cond_means);
        for (std::size_t i = 0; i < n; ++i) {
            structural_scores[i] = rt::sample_variance(cond_means[i]);
        }
    }

    const rt::RegretScores scores = rt::make_regret_scores(leaf_scores, structural_scores);
    std::vector<rt::SelectiveCurve> curves;
    for (const auto strategy :
         {rt::RankStrategy::leaf, rt::RankStrategy::structural, rt::RankStrategy::total}) {
        curves.push_back(rt::recall_coverage_curve(predictions, test.labels, scores, strategy,
                                                   config.coverage_grid));
    }
    curves.push_back(rt::curve_from_scores(predictions, test.labels,
                                           rt::confidence_scores(probabilities), "confidence",
                                           config.coverage_grid));

    std::vector<rt::InstanceRegret> instance_rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        instance_rows[i] = {i,
                            leaf_ids[i],
                            leaf_sizes[i],
                            probabilities[i],
                            scores.leaf[i],
                            scores.structural[i],
                            scores.total[i]};
    }

    const std::string mode = rt::to_string(config.resample);
    write_outputs(config.out_dir,
                  {{"selective.csv", rt::selective_csv(curves)},
                   {"selective.json", rt::selective_json(curves, mode).dump(2) + "\n"},
                   {"regret.csv", rt::instance_regret_csv(instance_rows)},
                   {"regret.json", rt::instance_regret_json(instance_rows, mode).dump(2) + "\n"},
                   {"fig3.svg", rt::selective_svg(curves)}});

    const auto& total_curve = curves[2];
    const auto full = total_curve.points.front().recall;
    std::cout << "strategies=" << curves.size() << " grid=" << config.coverage_grid.size()
              << " full_coverage_recall="
              << (full ? rt::fmt_double(*full) : std::string("undefined")) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decision-tree regret decomposition experiments"};
    app.require_subcommand(1);

    std::string config_path;
    FlagOverrides flags;
    std::uint64_t seed_flag = 0;
    std::size_t replications_flag = 0, min_leaf_flag = 0, max_depth_flag = 0;
    std::string out_flag, resample_flag, schema_flag;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file")->required();
        cmd->add_option("--seed", seed_flag, "override master seed");
        cmd->add_option("--replications", replications_flag, "override replication count");
        cmd->add_option("--min-leaf", min_leaf_flag, "override tree min_leaf");
        cmd->add_option("--max-depth", max_depth_flag, "override tree max_depth");
        cmd->add_option("--out", out_flag, "override output directory");
        cmd->add_option("--resample", resample_flag,
                        "resampling mechanism: bootstrap or label-redraw");
        cmd->add_option("--schema", schema_flag, "override schema file for csv datasets");
    };

    CLI::App* validate = app.add_subcommand("validate", "nested Monte Carlo decomposition check");
    CLI::App* sweep = app.add_subcommand("sweep", "leaf-size regret/loss trade-off");
    CLI::App* table = app.add_subcommand("table", "benchmark regret table");
    CLI::App* selective = app.add_subcommand("selective", "recall-coverage abstention curves");
    for (auto* cmd : {validate, sweep, table, selective}) add_common(cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        if (active->count("--seed")) flags.seed = seed_flag;
        if (active->count("--replications")) flags.replications = replications_flag;
        if (active->count("--min-leaf")) flags.min_leaf = min_leaf_flag;
        if (active->count("--max-depth")) flags.max_depth = max_depth_flag;
        if (active->count("--out")) flags.out_dir = out_flag;
        if (active->count("--resample")) flags.resample = resample_flag;
        if (active->count("--schema")) flags.schema = schema_flag;
        const RunConfig config = load_config(config_path, flags);

        if (validate->parsed()) return cmd_validate(config);
        if (sweep->parsed()) return cmd_sweep(config);
        if (table->parsed()) return cmd_table(config);
        if (selective->parsed()) return cmd_selective(config);
        std::cerr << "error: no command selected\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const rt::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
