#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "regret_tree/error.hpp"
#include "regret_tree/matrix.hpp"
#include "regret_tree/rng.hpp"

namespace regret_tree {

enum class ColumnKind { numeric, categorical, label };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    // Categorical: admissible category codes, in encoding order.
    // Label: optional two-entry override fixing which raw value maps to 0/1.
    std::vector<std::string> categories;
};

// Encoded tabular data. Immutable once built; safe to share across threads.
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<ColumnSpec> schema;

    std::size_t n() const { return features.rows(); }
    std::size_t d() const { return features.cols(); }
};

inline void validate_schema(const std::vector<ColumnSpec>& schema) {
    std::size_t label_count = 0;
    for (const auto& col : schema) {
        if (col.kind == ColumnKind::label) ++label_count;
        if (col.kind == ColumnKind::categorical) {
            require(!col.categories.empty(), ErrorCode::schema_mismatch,
                    "categorical column '" + col.name + "' lists no categories");
            auto sorted = col.categories;
            std::sort(sorted.begin(), sorted.end());
            require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                    ErrorCode::schema_mismatch,
                    "categorical column '" + col.name + "' has duplicate categories");
        }
        if (col.kind == ColumnKind::label && !col.categories.empty()) {
            require(col.categories.size() == 2, ErrorCode::schema_mismatch,
                    "label column '" + col.name + "' override must list exactly two values");
            require(col.categories[0] != col.categories[1], ErrorCode::schema_mismatch,
                    "label column '" + col.name + "' override values must differ");
        }
    }
    require(label_count == 1, ErrorCode::schema_mismatch,
            "schema must contain exactly one label column");
}

// Start offset of each schema column inside the encoded feature block.
// Label columns occupy no encoded columns.
inline std::vector<std::size_t> feature_offsets(const std::vector<ColumnSpec>& schema) {
    std::vector<std::size_t> offsets;
    offsets.reserve(schema.size());
    std::size_t at = 0;
    for (const auto& col : schema) {
        offsets.push_back(at);
        if (col.kind == ColumnKind::numeric) at += 1;
        if (col.kind == ColumnKind::categorical) at += col.categories.size();
    }
    return offsets;
}

inline std::size_t encoded_width(const std::vector<ColumnSpec>& schema) {
    std::size_t d = 0;
    for (const auto& col : schema) {
        if (col.kind == ColumnKind::numeric) d += 1;
        if (col.kind == ColumnKind::categorical) d += col.categories.size();
    }
    return d;
}

// Recovers the category code of a one-hot encoded column for one row.
inline const std::string& decode_category(const Dataset& data, std::size_t row,
                                          std::size_t schema_column) {
    const auto& col = data.schema.at(schema_column);
    require(col.kind == ColumnKind::categorical, ErrorCode::invalid_argument,
            "column '" + col.name + "' is not categorical");
    const std::size_t offset = feature_offsets(data.schema)[schema_column];
    for (std::size_t k = 0; k < col.categories.size(); ++k) {
        if (data.features(row, offset + k) == 1.0) return col.categories[k];
    }
    fail(ErrorCode::unknown_category,
         "row has no active category in column '" + col.name + "'");
}

// --- schema file -----------------------------------------------------------

inline std::vector<ColumnSpec> load_schema(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::missing_file, "cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::schema_mismatch, "schema file " + path + " is not valid JSON: " + e.what());
    }
    require(j.is_array(), ErrorCode::schema_mismatch,
            "schema file must hold an array of column entries");
    std::vector<ColumnSpec> schema;
    for (const auto& entry : j) {
        ColumnSpec col;
        require(entry.contains("name") && entry.contains("kind"), ErrorCode::schema_mismatch,
                "schema entries need 'name' and 'kind'");
        col.name = entry.at("name").get<std::string>();
        const std::string kind = entry.at("kind").get<std::string>();
        if (kind == "numeric") {
            col.kind = ColumnKind::numeric;
        } else if (kind == "categorical") {
            col.kind = ColumnKind::categorical;
        } else if (kind == "label") {
            col.kind = ColumnKind::label;
        } else {
            fail(ErrorCode::schema_mismatch, "unknown column kind '" + kind + "'");
        }
        if (entry.contains("categories")) {
            col.categories = entry.at("categories").get<std::vector<std::string>>();
        }
        schema.push_back(std::move(col));
    }
    validate_schema(schema);
    return schema;
}

// --- CSV parsing ------------------------------------------------------------

namespace detail {

// Comma-delimited with double-quote escaping; rows end at unquoted newlines.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"': quoted = true; any = true; break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r': break;
            case '\n':
                if (any || !field.empty() || !row.empty()) {
                    row.push_back(std::move(field));
                    field.clear();
                    rows.push_back(std::move(row));
                    row.clear();
                    any = false;
                }
                break;
            default: field += c; any = true; break;
        }
    }
    if (any || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline double median_of(std::vector<double> values) {
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace detail

// Loads a CSV file against a schema: numeric columns pass through (unparseable
// cells take the column median), categorical columns one-hot encode, and the
// label column maps its two raw values to {0,1} (lexicographically smaller
// value -> 0 unless the schema override fixes the order).
inline Dataset load_csv(const std::string& path, const std::vector<ColumnSpec>& schema) {
    validate_schema(schema);
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::missing_file, "cannot open CSV file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto rows = detail::parse_csv(text);
    require(!rows.empty(), ErrorCode::schema_mismatch, "CSV file has no header row: " + path);

    const auto& header = rows.front();
    require(header.size() == schema.size(), ErrorCode::schema_mismatch,
            "CSV has " + std::to_string(header.size()) + " columns, schema expects " +
                std::to_string(schema.size()));
    for (std::size_t c = 0; c < schema.size(); ++c) {
        require(header[c] == schema[c].name, ErrorCode::schema_mismatch,
                "CSV column '" + header[c] + "' does not match schema column '" +
                    schema[c].name + "'");
    }

    const std::size_t n = rows.size() - 1;
    require(n >= 1, ErrorCode::schema_mismatch, "CSV file has no data rows: " + path);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        require(rows[r].size() == schema.size(), ErrorCode::schema_mismatch,
                "row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                    " fields, expected " + std::to_string(schema.size()));
    }

    // Label mapping.
    std::size_t label_col = 0;
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (schema[c].kind == ColumnKind::label) label_col = c;
    }
    std::vector<std::string> raw_labels(n);
    for (std::size_t r = 0; r < n; ++r) raw_labels[r] = rows[r + 1][label_col];
    std::string zero_value, one_value;
    if (!schema[label_col].categories.empty()) {
        zero_value = schema[label_col].categories[0];
        one_value = schema[label_col].categories[1];
    } else {
        std::vector<std::string> distinct = raw_labels;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        require(distinct.size() == 2, ErrorCode::non_binary_label,
                "label column '" + schema[label_col].name + "' has " +
                    std::to_string(distinct.size()) + " distinct values, expected 2");
        zero_value = distinct[0];
        one_value = distinct[1];
    }
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        if (raw_labels[r] == zero_value) {
            labels[r] = 0;
        } else if (raw_labels[r] == one_value) {
            labels[r] = 1;
        } else {
            fail(ErrorCode::non_binary_label,
                 "label value '" + raw_labels[r] + "' is neither '" + zero_value + "' nor '" +
                     one_value + "'");
        }
    }

    const auto offsets = feature_offsets(schema);
    Matrix features(n, encoded_width(schema));
    for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto& col = schema[c];
        if (col.kind == ColumnKind::label) continue;
        if (col.kind == ColumnKind::numeric) {
            std::vector<std::optional<double>> parsed(n);
            std::vector<double> seen;
            for (std::size_t r = 0; r < n; ++r) {
                parsed[r] = detail::parse_number(rows[r + 1][c]);
                if (parsed[r]) seen.push_back(*parsed[r]);
            }
            require(!seen.empty(), ErrorCode::schema_mismatch,
                    "numeric column '" + col.name + "' has no parseable values");
            const double median = detail::median_of(seen);
            for (std::size_t r = 0; r < n; ++r) {
                features(r, offsets[c]) = parsed[r] ? *parsed[r] : median;
            }
        } else {
            for (std::size_t r = 0; r < n; ++r) {
                const std::string& value = rows[r + 1][c];
                const auto it =
                    std::find(col.categories.begin(), col.categories.end(), value);
                require(it != col.categories.end(), ErrorCode::unknown_category,
                        "value '" + value + "' is not a listed category of column '" +
                            col.name + "'");
                const auto k = static_cast<std::size_t>(it - col.categories.begin());
                features(r, offsets[c] + k) = 1.0;
            }
        }
    }

    return Dataset{std::move(features), std::move(labels), schema};
}

// --- synthetic data ---------------------------------------------------------

inline double sigmoid(double z) {
    double p;
    if (z >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        p = e / (1.0 + e);
    }
    // Keep strictly inside (0,1) even when exp() saturates.
    constexpr double floor = 1e-15;
    return std::min(std::max(p, floor), 1.0 - floor);
}

struct SyntheticData {
    Dataset dataset;
    std::vector<double> p_star;
};

// Standard-normal features with Bernoulli(sigmoid(w.x + b)) labels. The same
// (n, d, weights, intercept, seed) always reproduces the same bits.
inline SyntheticData make_synthetic(std::size_t n, std::size_t d,
                                    const std::vector<double>& weights, double intercept,
                                    std::uint64_t seed) {
    require(n >= 1 && d >= 1, ErrorCode::invalid_argument, "need n >= 1 and d >= 1");
    require(weights.size() == d, ErrorCode::invalid_dimension,
            "weights has length " + std::to_string(weights.size()) + ", expected " +
                std::to_string(d));
    Rng rng(seed);
    Matrix features(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) features(i, j) = rng.normal();
    }
    std::vector<double> p_star(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = intercept;
        for (std::size_t j = 0; j < d; ++j) z += weights[j] * features(i, j);
        p_star[i] = sigmoid(z);
        labels[i] = rng.bernoulli(p_star[i]) ? 1 : 0;
    }
    std::vector<ColumnSpec> schema;
    schema.reserve(d + 1);
    for (std::size_t j = 0; j < d; ++j) {
        schema.push_back({"x" + std::to_string(j), ColumnKind::numeric, {}});
    }
    schema.push_back({"y", ColumnKind::label, {}});
    return SyntheticData{Dataset{std::move(features), std::move(labels), std::move(schema)},
                         std::move(p_star)};
}

// --- splitting ---------------------------------------------------------------

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
    require(n >= 1, ErrorCode::degenerate_split, "cannot split an empty dataset");
    require(test_fraction > 0.0 && test_fraction < 1.0, ErrorCode::invalid_argument,
            "test_fraction must lie in (0,1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = rng.next_below(i + 1);
        std::swap(order[i], order[j]);
    }
    const auto train_n = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n) * (1.0 - test_fraction)));
    require(train_n >= 2, ErrorCode::degenerate_split,
            "train partition would hold fewer than 2 instances");
    require(train_n < n, ErrorCode::degenerate_split, "test partition would be empty");
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_n));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_n), order.end());
    return out;
}

inline Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.features = data.features.take_rows(indices);
    out.labels.reserve(indices.size());
    for (const auto i : indices) out.labels.push_back(data.labels[i]);
    out.schema = data.schema;
    return out;
}

inline std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                                    std::uint64_t seed) {
    const auto idx = split_indices(data.n(), test_fraction, seed);
    return {subset(data, idx.train), subset(data, idx.test)};
}

}  // namespace regret_tree
