#pragma once

#include <stdexcept>
#include <string>

namespace regret_tree {

enum class ErrorCode {
    missing_file,
    schema_mismatch,
    non_binary_label,
    unknown_category,
    invalid_dimension,
    degenerate_split,
    empty_training_set,
    min_leaf_exceeds_data,
    dimension_mismatch,
    empty_eval_set,
    invalid_probability,
    zero_leaf_size,
    insufficient_replications,
    insufficient_realizations,
    length_mismatch,
    single_class_data,
    singular_hessian,
    empty_scores,
    empty_grid,
    invalid_argument,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::missing_file: return "missing_file";
        case ErrorCode::schema_mismatch: return "schema_mismatch";
        case ErrorCode::non_binary_label: return "non_binary_label";
        case ErrorCode::unknown_category: return "unknown_category";
        case ErrorCode::invalid_dimension: return "invalid_dimension";
        case ErrorCode::degenerate_split: return "degenerate_split";
        case ErrorCode::empty_training_set: return "empty_training_set";
        case ErrorCode::min_leaf_exceeds_data: return "min_leaf_exceeds_data";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::empty_eval_set: return "empty_eval_set";
        case ErrorCode::invalid_probability: return "invalid_probability";
        case ErrorCode::zero_leaf_size: return "zero_leaf_size";
        case ErrorCode::insufficient_replications: return "insufficient_replications";
        case ErrorCode::insufficient_realizations: return "insufficient_realizations";
        case ErrorCode::length_mismatch: return "length_mismatch";
        case ErrorCode::single_class_data: return "single_class_data";
        case ErrorCode::singular_hessian: return "singular_hessian";
        case ErrorCode::empty_scores: return "empty_scores";
        case ErrorCode::empty_grid: return "empty_grid";
        case ErrorCode::invalid_argument: return "invalid_argument";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace regret_tree
