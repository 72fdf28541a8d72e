#pragma once

#include <stdexcept>
#include <string>

namespace etsi {

// Three failure families, mapped one-to-one onto the CLI exit codes
// (usage = 1, data = 2, numerical = 3).

class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Header does not match the expected column layout.
class SchemaError : public DataError {
public:
  using DataError::DataError;
};

/// A field could not be parsed as a number.
class ParseError : public DataError {
public:
  using DataError::DataError;
};

/// A row (or the study as a whole) breaks a record invariant.
class ValidationError : public DataError {
public:
  using DataError::DataError;
};

/// Degenerate bandwidths, undefined variances, null design denominators.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace etsi
