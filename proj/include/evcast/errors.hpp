#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evcast {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration: bad grid shape, malformed config file, violated
/// generator invariants, unknown feature tags.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Bad or insufficient input data: unparsable records, missing coverage,
/// empty training sets, all-zero ground truth.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// A malformed line in a record file. Carries the 1-based line number.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& msg)
        : DataError("line " + std::to_string(line) + ": " + msg), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Numerical failure: non-finite values where finite ones are required, or an
/// internal consistency check that did not hold.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

} // namespace evcast
