#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace odassim {

/// Malformed or inconsistent input file content.
class IngestError : public std::runtime_error {
  public:
    IngestError(const std::string &message, std::size_t line = 0)
        : std::runtime_error(line == 0 ? message
                                       : "line " + std::to_string(line) + ": " + message),
          line_{line} {}

    /// 1-based line number of the offending row, 0 when not tied to a row.
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// A query reaches outside the region a population surface supports.
class InterfaceError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

/// Invalid run configuration (bad key, missing file, inconsistent options).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Non-recoverable numerical breakdown (non-finite ensemble, failed factorization).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace odassim
