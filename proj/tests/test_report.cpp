#include <catch2/catch.hpp>

#include <algorithm>
#include <string>
#include <vector>

#include "regret_tree/dataset.hpp"
#include "regret_tree/oracle.hpp"
#include "regret_tree/report.hpp"
#include "regret_tree/svg.hpp"

namespace rt = regret_tree;

namespace {

// Minimal XML well-formedness check: balanced, properly nested tags after the
// declaration; attribute text must not contain raw '<'.
bool xml_well_formed(const std::string& text) {
    std::size_t i = 0;
    if (text.rfind("<?xml", 0) == 0) {
        const auto end = text.find("?>");
        if (end == std::string::npos) return false;
        i = end + 2;
    }
    std::vector<std::string> stack;
    while (i < text.size()) {
        const char c = text[i];
        if (c != '<') {
            if (c == '>') return false;
            ++i;
            continue;
        }
        const auto close = text.find('>', i);
        if (close == std::string::npos) return false;
        std::string tag = text.substr(i + 1, close - i - 1);
        if (tag.empty()) return false;
        const bool closing = tag.front() == '/';
        const bool self_closing = tag.back() == '/';
        if (closing) {
            const std::string name = tag.substr(1);
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (!self_closing) {
            const auto space = tag.find_first_of(" \t\n");
            stack.push_back(space == std::string::npos ? tag : tag.substr(0, space));
        }
        i = close + 1;
    }
    return stack.empty();
}

rt::ValidationReport tiny_validation_report() {
    const auto synth = rt::make_synthetic(400, 2, {1.2, -0.8}, 0.0, 404u);
    rt::Matrix eval(6, 2);
    for (std::size_t e = 0; e < 6; ++e) {
        eval(e, 0) = -1.0 + 0.4 * static_cast<double>(e);
        eval(e, 1) = 0.1;
    }
    return rt::validate_decomposition(synth.dataset, 30, {.min_leaf = 10, .max_depth = 5},
                                      eval, 123u);
}

}  // namespace

TEST_CASE("xml checker accepts and rejects the right shapes") {
    REQUIRE(xml_well_formed("<?xml version=\"1.0\"?><a><b x=\"1\"/><c>t</c></a>"));
    REQUIRE_FALSE(xml_well_formed("<a><b></a></b>"));
    REQUIRE_FALSE(xml_well_formed("<a>"));
    REQUIRE_FALSE(xml_well_formed("<a>3 < 4</a>"));
}

TEST_CASE("deterministic double formatting") {
    REQUIRE(rt::fmt_double(0.0025) == "0.0025");
    REQUIRE(rt::fmt_double(1.0 / 3.0) == rt::fmt_double(1.0 / 3.0));
    REQUIRE(rt::fmt_fixed(15.34375, 2) == "15.34");
    REQUIRE(rt::fmt_fixed(0.000096, 6) == "0.000096");
}

TEST_CASE("csv escaping quotes only when needed") {
    REQUIRE(rt::csv_escape("plain") == "plain");
    REQUIRE(rt::csv_escape("a,b") == "\"a,b\"");
    REQUIRE(rt::csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("benchmark table rows render at the fixed precision") {
    const std::vector<rt::TableRow> rows = {{"taiwan_credit", 0.000096, 0.001473},
                                            {"hmeq", 0.001511, 0.010521},
                                            {"bank_marketing", 0.000120, 0.001520}};
    const std::string csv = rt::table_csv(rows);
    REQUIRE(csv ==
            "dataset,leaf_regret,structural_regret,ratio\n"
            "taiwan_credit,0.000096,0.001473,15.34\n"
            "hmeq,0.001511,0.010521,6.96\n"
            "bank_marketing,0.000120,0.001520,12.67\n");
}

TEST_CASE("table ratio column is consistent with its inputs") {
    const rt::TableRow row{"synthetic", 0.002, 0.007};
    REQUIRE(row.ratio() == Approx(3.5).margin(0.01));
}

TEST_CASE("validation report serializes consistently") {
    const auto report = tiny_validation_report();
    const std::string csv = rt::validation_csv(report);
    REQUIRE(csv.rfind("point_id,expected_leaf,structural,total_estimated,total_simulated",
                      0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 1 + 6);

    const auto j = rt::validation_json(report);
    REQUIRE(j.at("points").size() == 6);
    REQUIRE(j.at("correlation").get<double>() == report.correlation);
    REQUIRE(j.at("realizations").get<std::size_t>() == 30);
}

TEST_CASE("validation scatter is well-formed xml") {
    REQUIRE(xml_well_formed(rt::validation_svg(tiny_validation_report())));
}

TEST_CASE("sweep outputs are well-formed") {
    const auto synth = rt::make_synthetic(500, 1, {2.0}, 0.0, 77u);
    const auto report = rt::leaf_size_sweep(synth.dataset, {5, 20, 80}, 6, 99u, 8, 0.3);
    const std::string csv = rt::sweep_csv(report);
    REQUIRE(csv.rfind("min_leaf,mean_leaf_regret,mean_log_loss", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 1 + 3);
    REQUIRE(xml_well_formed(rt::sweep_svg(report)));
}

TEST_CASE("selective outputs carry one row per strategy and grid point") {
    const std::vector<int> labels = {1, 0, 1, 1, 0, 1};
    const std::vector<int> predictions = {1, 0, 0, 1, 0, 1};
    const auto scores = rt::make_regret_scores({0.1, 0.0, 0.5, 0.2, 0.0, 0.3},
                                               {0.0, 0.1, 0.4, 0.1, 0.0, 0.2});
    std::vector<rt::SelectiveCurve> curves;
    for (const auto strategy : {rt::RankStrategy::leaf, rt::RankStrategy::structural,
                                rt::RankStrategy::total}) {
        curves.push_back(rt::recall_coverage_curve(predictions, labels, scores, strategy,
                                                   {1.0, 0.5, 0.25}));
    }
    const std::string csv = rt::selective_csv(curves);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 3);
    REQUIRE(xml_well_formed(rt::selective_svg(curves)));

    const auto j = rt::selective_json(curves, "bootstrap");
    REQUIRE(j.at("curves").size() == 3);
    REQUIRE(j.at("recall_definition") == "retained-subset");
}

TEST_CASE("undefined recall renders as an empty csv field and breaks the svg line") {
    const std::vector<int> labels = {0, 0, 1};
    const std::vector<int> predictions = {0, 0, 1};
    const auto scores = rt::make_regret_scores({0.0, 0.1, 0.9}, {0.0, 0.0, 0.0});
    const auto curve = rt::recall_coverage_curve(predictions, labels, scores,
                                                 rt::RankStrategy::total, {1.0, 0.5});
    const std::string csv = rt::selective_csv({curve});
    REQUIRE(csv.find("total,0.5,,2,0\n") != std::string::npos);
    REQUIRE(xml_well_formed(rt::selective_svg({curve})));
}

TEST_CASE("per-instance regret report lists the pinned columns") {
    const std::vector<rt::InstanceRegret> rows = {{0, 2, 25, 0.4, 0.0096, 0.002, 0.0116}};
    const std::string csv = rt::instance_regret_csv(rows);
    REQUIRE(csv ==
            "instance_id,leaf_id,n_L,p_hat,leaf_regret,structural_regret,total\n"
            "0,2,25,0.4,0.0096,0.002,0.0116\n");
    const auto j = rt::instance_regret_json(rows, "bootstrap");
    REQUIRE(j.at("instances").size() == 1);
    REQUIRE(j.at("resample") == "bootstrap");
}
