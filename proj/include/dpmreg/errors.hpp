#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace dpmreg {

// Bad arguments to a sampler or routine (non-positive variance, shape, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or degenerate input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Factorization failure, exhausted truncation, non-finite likelihood.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(const std::string&)>;

// Installs a process-wide warning sink and returns the previous one.
// The default sink writes to stderr.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace dpmreg
