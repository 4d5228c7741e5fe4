#pragma once

#include <stdexcept>
#include <string>

namespace mlcil {

// Input vector or matrix does not match the model / loss shape.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Non-finite value encountered during an optimizer update.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A loss was asked to sum over a class whose label is missing.
struct AnnotationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A replay sample reached the replay loss with unlabeled old classes,
// i.e. online relabeling did not run.
struct RelabelIncompleteError : AnnotationError {
    using AnnotationError::AnnotationError;
};

// Two prediction vectors do not cover the same output units.
struct AlignmentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ScheduleError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Dataset file or in-memory dataset violates the CSV / label contract.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operations called out of order (tasks, relabel without a past model).
struct ProtocolError : std::logic_error {
    using std::logic_error::logic_error;
};

// Metrics requested over an empty test set or empty row list.
struct EvaluationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace mlcil
