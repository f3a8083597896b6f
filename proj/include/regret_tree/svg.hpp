#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "regret_tree/oracle.hpp"
#include "regret_tree/report.hpp"
#include "regret_tree/selective.hpp"

namespace regret_tree {

// Self-contained SVG plots with byte-stable output.

namespace svg_detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) { return fmt_fixed(v, 2); }

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 70.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 55.0;

struct LinearScale {
    double domain_min = 0.0;
    double domain_max = 1.0;
    double range_min = 0.0;
    double range_max = 1.0;

    double operator()(double v) const {
        const double span = domain_max - domain_min;
        const double t = span != 0.0 ? (v - domain_min) / span : 0.5;
        return range_min + t * (range_max - range_min);
    }
};

inline std::string header(const std::string& title) {
    std::string out =
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
        "viewBox=\"0 0 640 480\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
    out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\">" +
           xml_escape(title) + "</text>\n";
    return out;
}

inline std::string axis_line(double x1, double y1, double x2, double y2) {
    return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
           "\" y2=\"" + num(y2) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
}

inline std::string text_at(double x, double y, const std::string& s,
                           const std::string& anchor, int size = 11,
                           const std::string& extra = "") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor +
           "\" font-family=\"sans-serif\" font-size=\"" + std::to_string(size) + "\"" +
           extra + ">" + xml_escape(s) + "</text>\n";
}

inline std::string axes_box() {
    std::string out;
    out += axis_line(kMarginLeft, kHeight - kMarginBottom, kWidth - kMarginRight,
                     kHeight - kMarginBottom);
    out += axis_line(kMarginLeft, kMarginTop, kMarginLeft, kHeight - kMarginBottom);
    return out;
}

inline std::string x_tick(const LinearScale& xs, double v, const std::string& label) {
    const double x = xs(v);
    const double y = kHeight - kMarginBottom;
    return axis_line(x, y, x, y + 5) + text_at(x, y + 18, label, "middle");
}

inline std::string y_tick(const LinearScale& ys, double v, const std::string& label,
                          bool right = false) {
    const double y = ys(v);
    const double x = right ? kWidth - kMarginRight : kMarginLeft;
    return axis_line(x, y, x + (right ? 5.0 : -5.0), y) +
           text_at(x + (right ? 9.0 : -9.0), y + 4, label, right ? "start" : "end");
}

inline std::vector<double> nice_ticks(double lo, double hi, int count = 5) {
    std::vector<double> ticks;
    if (!(hi > lo)) {
        ticks.push_back(lo);
        return ticks;
    }
    for (int i = 0; i <= count; ++i) {
        ticks.push_back(lo + (hi - lo) * static_cast<double>(i) / count);
    }
    return ticks;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace svg_detail

// Scatter of estimated vs simulated totals with the identity reference line.
inline std::string validation_svg(const ValidationReport& report) {
    using namespace svg_detail;
    double hi = 0.0;
    for (const auto& p : report.points) {
        hi = std::max(hi, std::max(p.decomposition.total_estimated,
                                   p.decomposition.total_simulated));
    }
    if (hi <= 0.0) hi = 1.0;
    hi *= 1.05;
    LinearScale xs{0.0, hi, kMarginLeft, kWidth - kMarginRight};
    LinearScale ys{0.0, hi, kHeight - kMarginBottom, kMarginTop};

    std::string out = header("Estimated vs simulated predictive variance");
    out += axes_box();
    for (const auto t : nice_ticks(0.0, hi)) {
        out += x_tick(xs, t, tick_label(t));
        out += y_tick(ys, t, tick_label(t));
    }
    out += text_at(kWidth / 2, kHeight - 12, "estimated total regret", "middle", 12);
    out += text_at(16, kHeight / 2, "simulated variance", "middle", 12,
                   " transform=\"rotate(-90 16 " + num(kHeight / 2) + ")\"");
    out += "<line x1=\"" + num(xs(0.0)) + "\" y1=\"" + num(ys(0.0)) + "\" x2=\"" +
           num(xs(hi)) + "\" y2=\"" + num(ys(hi)) +
           "\" stroke=\"#888888\" stroke-dasharray=\"5,4\" stroke-width=\"1\"/>\n";
    for (const auto& p : report.points) {
        out += "<circle cx=\"" + num(xs(p.decomposition.total_estimated)) + "\" cy=\"" +
               num(ys(p.decomposition.total_simulated)) +
               "\" r=\"3.5\" fill=\"#1f77b4\" fill-opacity=\"0.75\"/>\n";
    }
    out += text_at(kWidth - kMarginRight, kMarginTop + 14,
                   "r = " + fmt_fixed(report.correlation, 3), "end", 12);
    out += "</svg>\n";
    return out;
}

// Dual-axis trade-off: leaf regret (left axis) and log loss (right axis)
// against min_leaf.
inline std::string sweep_svg(const SweepReport& report) {
    using namespace svg_detail;
    const std::size_t k = report.grid.size();
    double regret_hi = 0.0, loss_hi = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
        regret_hi = std::max(regret_hi, report.mean_leaf_regret[g]);
        loss_hi = std::max(loss_hi, report.mean_log_loss[g]);
    }
    if (regret_hi <= 0.0) regret_hi = 1.0;
    if (loss_hi <= 0.0) loss_hi = 1.0;
    regret_hi *= 1.05;
    loss_hi *= 1.05;
    LinearScale xs{0.0, static_cast<double>(k - 1), kMarginLeft, kWidth - kMarginRight};
    LinearScale ys_regret{0.0, regret_hi, kHeight - kMarginBottom, kMarginTop};
    LinearScale ys_loss{0.0, loss_hi, kHeight - kMarginBottom, kMarginTop};

    std::string out = header("Leaf regret and log loss vs minimum leaf size");
    out += axes_box();
    out += axis_line(kWidth - kMarginRight, kMarginTop, kWidth - kMarginRight,
                     kHeight - kMarginBottom);
    for (std::size_t g = 0; g < k; ++g) {
        out += x_tick(xs, static_cast<double>(g), std::to_string(report.grid[g]));
    }
    for (const auto t : nice_ticks(0.0, regret_hi)) out += y_tick(ys_regret, t, tick_label(t));
    for (const auto t : nice_ticks(0.0, loss_hi)) out += y_tick(ys_loss, t, tick_label(t), true);
    out += text_at(kWidth / 2, kHeight - 12, "min_leaf", "middle", 12);

    const auto polyline = [&](const std::vector<double>& values, const LinearScale& ys,
                              const std::string& color, const std::string& dash) {
        std::string pts;
        for (std::size_t g = 0; g < k; ++g) {
            pts += num(xs(static_cast<double>(g))) + ',' + num(ys(values[g]));
            if (g + 1 < k) pts += ' ';
        }
        return "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"2\"" + dash + "/>\n";
    };
    out += polyline(report.mean_leaf_regret, ys_regret, "#1f77b4", "");
    out += polyline(report.mean_log_loss, ys_loss, "#d62728", " stroke-dasharray=\"6,4\"");
    out += text_at(kMarginLeft + 8, kMarginTop + 14, "leaf regret", "start", 12,
                   " fill=\"#1f77b4\"");
    out += text_at(kMarginLeft + 8, kMarginTop + 30, "log loss", "start", 12,
                   " fill=\"#d62728\"");
    out += "</svg>\n";
    return out;
}

// Recall vs coverage, x-axis reversed (full coverage at the left). Undefined
// recall points break the polyline.
inline std::string selective_svg(const std::vector<SelectiveCurve>& curves) {
    using namespace svg_detail;
    double cov_min = 1.0;
    for (const auto& curve : curves) {
        for (const auto& p : curve.points) cov_min = std::min(cov_min, p.coverage);
    }
    LinearScale xs{1.0, cov_min, kMarginLeft, kWidth - kMarginRight};  // reversed
    LinearScale ys{0.0, 1.0, kHeight - kMarginBottom, kMarginTop};

    std::string out = header("Selective prediction: recall vs coverage");
    out += axes_box();
    for (const auto t : nice_ticks(cov_min, 1.0)) out += x_tick(xs, t, tick_label(t));
    for (const auto t : nice_ticks(0.0, 1.0)) out += y_tick(ys, t, tick_label(t));
    out += text_at(kWidth / 2, kHeight - 12, "coverage (decreasing)", "middle", 12);
    out += text_at(16, kHeight / 2, "recall", "middle", 12,
                   " transform=\"rotate(-90 16 " + num(kHeight / 2) + ")\"");

    const std::vector<std::string> palette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                              "#8c564b"};
    std::size_t series = 0;
    for (const auto& curve : curves) {
        const std::string color = palette[series % palette.size()];
        std::string segment;
        std::string shapes;
        for (const auto& p : curve.points) {
            if (!p.recall) {
                if (!segment.empty()) {
                    shapes += "<polyline points=\"" + segment + "\" fill=\"none\" stroke=\"" +
                              color + "\" stroke-width=\"2\"/>\n";
                    segment.clear();
                }
                continue;
            }
            if (!segment.empty()) segment += ' ';
            segment += num(xs(p.coverage)) + ',' + num(ys(*p.recall));
        }
        if (!segment.empty()) {
            shapes += "<polyline points=\"" + segment + "\" fill=\"none\" stroke=\"" + color +
                      "\" stroke-width=\"2\"/>\n";
        }
        out += shapes;
        out += text_at(kWidth - kMarginRight - 8,
                       kMarginTop + 16 + 16 * static_cast<double>(series), curve.strategy,
                       "end", 12, " fill=\"" + color + "\"");
        ++series;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace regret_tree
