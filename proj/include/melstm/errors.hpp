// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace melstm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf produced or consumed where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A precondition between calls was broken (stale cache, bad distribution, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Bad user-supplied data (empty sequence, invalid label, ...).
class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Checkpoint or file format incompatible with this build.
class VersionError : public Error {
public:
    using Error::Error;
};

}  // namespace melstm
