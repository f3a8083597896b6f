#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "regret_tree/error.hpp"
#include "regret_tree/oracle.hpp"
#include "regret_tree/regret.hpp"
#include "regret_tree/selective.hpp"

namespace regret_tree {

// Fixed-format doubles so identical runs emit identical bytes.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string fmt_fixed(double v, int decimals) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::missing_file, "cannot write file: " + path);
    out << content;
    require(out.good(), ErrorCode::missing_file, "failed while writing: " + path);
}

// --- per-instance regret report ------------------------------------------------

struct InstanceRegret {
    std::size_t instance_id = 0;
    int leaf_id = -1;
    std::size_t n_leaf = 0;
    double p_hat = 0.0;
    double leaf_regret = 0.0;
    double structural_regret = 0.0;
    double total = 0.0;
};

inline std::string instance_regret_csv(const std::vector<InstanceRegret>& rows) {
    std::string out = "instance_id,leaf_id,n_L,p_hat,leaf_regret,structural_regret,total\n";
    for (const auto& r : rows) {
        out += std::to_string(r.instance_id) + ',' + std::to_string(r.leaf_id) + ',' +
               std::to_string(r.n_leaf) + ',' + fmt_double(r.p_hat) + ',' +
               fmt_double(r.leaf_regret) + ',' + fmt_double(r.structural_regret) + ',' +
               fmt_double(r.total) + '\n';
    }
    return out;
}

inline nlohmann::json instance_regret_json(const std::vector<InstanceRegret>& rows,
                                           const std::string& resample_mode) {
    nlohmann::json instances = nlohmann::json::array();
    for (const auto& r : rows) {
        instances.push_back({{"instance_id", r.instance_id},
                             {"leaf_id", r.leaf_id},
                             {"n_L", r.n_leaf},
                             {"p_hat", r.p_hat},
                             {"leaf_regret", r.leaf_regret},
                             {"structural_regret", r.structural_regret},
                             {"total", r.total}});
    }
    return {{"resample", resample_mode}, {"instances", instances}};
}

// --- decomposition validation ----------------------------------------------------

inline std::string validation_csv(const ValidationReport& report) {
    std::string out =
        "point_id,expected_leaf,structural,total_estimated,total_simulated,relative_error\n";
    for (const auto& p : report.points) {
        const auto& d = p.decomposition;
        out += std::to_string(p.point_id) + ',' + fmt_double(d.expected_leaf) + ',' +
               fmt_double(d.structural) + ',' + fmt_double(d.total_estimated) + ',' +
               fmt_double(d.total_simulated) + ',' +
               fmt_double(relative_error(d.total_estimated, d.total_simulated)) + '\n';
    }
    return out;
}

inline nlohmann::json validation_json(const ValidationReport& report) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : report.points) {
        const auto& d = p.decomposition;
        points.push_back({{"point_id", p.point_id},
                          {"expected_leaf", d.expected_leaf},
                          {"structural", d.structural},
                          {"total_estimated", d.total_estimated},
                          {"total_simulated", d.total_simulated}});
    }
    return {{"correlation", report.correlation},
            {"median_relative_error", report.median_relative_error},
            {"realizations", report.realizations},
            {"seed", report.seed},
            {"structural_estimator", "variance of conditional means"},
            {"oracle",
             {{"converged", report.oracle.converged},
              {"final_gradient_norm", report.oracle.final_gradient_norm},
              {"newton_fallback", report.oracle.newton_fallback}}},
            {"points", points}};
}

// --- leaf-size sweep ---------------------------------------------------------------

inline std::string sweep_csv(const SweepReport& report) {
    std::string out = "min_leaf,mean_leaf_regret,mean_log_loss\n";
    for (std::size_t g = 0; g < report.grid.size(); ++g) {
        out += std::to_string(report.grid[g]) + ',' + fmt_double(report.mean_leaf_regret[g]) +
               ',' + fmt_double(report.mean_log_loss[g]) + '\n';
    }
    return out;
}

inline nlohmann::json sweep_json(const SweepReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t g = 0; g < report.grid.size(); ++g) {
        rows.push_back({{"min_leaf", report.grid[g]},
                        {"mean_leaf_regret", report.mean_leaf_regret[g]},
                        {"mean_log_loss", report.mean_log_loss[g]}});
    }
    return {{"realizations", report.realizations},
            {"max_depth", report.max_depth},
            {"seed", report.seed},
            {"rows", rows}};
}

// --- benchmark regret table ----------------------------------------------------------

struct TableRow {
    std::string dataset;
    double leaf_regret = 0.0;
    double structural_regret = 0.0;

    double ratio() const {
        return leaf_regret > 0.0 ? structural_regret / leaf_regret
                                 : std::numeric_limits<double>::infinity();
    }
};

inline std::string table_csv(const std::vector<TableRow>& rows) {
    std::string out = "dataset,leaf_regret,structural_regret,ratio\n";
    for (const auto& r : rows) {
        out += csv_escape(r.dataset) + ',' + fmt_fixed(r.leaf_regret, 6) + ',' +
               fmt_fixed(r.structural_regret, 6) + ',' + fmt_fixed(r.ratio(), 2) + '\n';
    }
    return out;
}

inline nlohmann::json table_json(const std::vector<TableRow>& rows,
                                 const std::string& resample_mode) {
    nlohmann::json out_rows = nlohmann::json::array();
    for (const auto& r : rows) {
        out_rows.push_back({{"dataset", r.dataset},
                            {"leaf_regret", r.leaf_regret},
                            {"structural_regret", r.structural_regret},
                            {"ratio", r.ratio()}});
    }
    return {{"resample", resample_mode}, {"rows", out_rows}};
}

// --- selective prediction curves ---------------------------------------------------

inline std::string selective_csv(const std::vector<SelectiveCurve>& curves) {
    std::string out = "strategy,coverage,recall,retained,retained_positives\n";
    for (const auto& curve : curves) {
        for (const auto& p : curve.points) {
            out += csv_escape(curve.strategy) + ',' + fmt_double(p.coverage) + ',' +
                   (p.recall ? fmt_double(*p.recall) : std::string()) + ',' +
                   std::to_string(p.retained) + ',' + std::to_string(p.retained_positives) +
                   '\n';
        }
    }
    return out;
}

inline nlohmann::json selective_json(const std::vector<SelectiveCurve>& curves,
                                     const std::string& resample_mode) {
    nlohmann::json out_curves = nlohmann::json::array();
    for (const auto& curve : curves) {
        nlohmann::json points = nlohmann::json::array();
        for (const auto& p : curve.points) {
            nlohmann::json point = {{"coverage", p.coverage},
                                    {"retained", p.retained},
                                    {"retained_positives", p.retained_positives}};
            if (p.recall) {
                point["recall"] = *p.recall;
            } else {
                point["recall"] = nullptr;
            }
            points.push_back(point);
        }
        out_curves.push_back({{"strategy", curve.strategy}, {"points", points}});
    }
    return {{"resample", resample_mode},
            {"recall_definition", "retained-subset"},
            {"curves", out_curves}};
}

}  // namespace regret_tree
