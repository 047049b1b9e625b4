#pragma once

#include <stdexcept>
#include <string>

namespace neuralign {

/// Invalid user input: configuration, manifest contents, misaligned stimuli.
/// The CLI maps this family to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stimulus IDs disagree between files.
class AlignmentError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Numerical failure or degenerate data. The CLI maps this family to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateInputError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Correlation with a constant (zero-variance) argument.
class UndefinedCorrelationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace neuralign
