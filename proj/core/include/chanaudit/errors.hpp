#pragma once

#include <stdexcept>
#include <string>

namespace chanaudit {

/// Base class for all chanaudit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input text (bad JSON, unreadable line).
struct ParseError : Error {
    using Error::Error;
};

/// A record violates the logging-contract invariants. Carries the offending field.
struct SchemaError : Error {
    explicit SchemaError(const std::string& field_name, const std::string& detail = "")
        : Error("schema violation in field '" + field_name + "'" +
                (detail.empty() ? "" : ": " + detail)),
          field(field_name) {}
    std::string field;
};

/// Two records share a (task_id, root_seed, regime) key.
struct DuplicateError : Error {
    using Error::Error;
};

/// A required field (e.g. e2) is absent on a filtered record.
struct MissingFieldError : Error {
    using Error::Error;
};

/// Argument outside its mathematical domain (p0 = 1, invalid level, ...).
struct DomainError : Error {
    using Error::Error;
};

/// A channel is missing a rate needed by the requested computation.
struct IncompleteChannelError : Error {
    using Error::Error;
};

/// A mixture scenario references a slice with no support.
struct MissingSliceError : Error {
    using Error::Error;
};

/// A holdout fold has no usable target records.
struct FoldError : Error {
    using Error::Error;
};

/// A random split produced an empty train or test side.
struct SplitError : Error {
    using Error::Error;
};

/// A convergence-audit prefix size exceeds the pool.
struct GridError : Error {
    using Error::Error;
};

/// A structural invariant does not hold (non-stochastic kernel, bad distribution).
struct InvariantError : Error {
    using Error::Error;
};

/// Quantile binning cannot produce distinct bins (constant feature).
struct DegenerateBinsError : Error {
    using Error::Error;
};

}  // namespace chanaudit
