#pragma once

#include <stdexcept>
#include <string>

namespace eqstream {

// Error taxonomy mirrors the CLI exit codes: parse/IO failures,
// configuration failures, and file-format failures are distinct.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data (geometry mismatches, invalid streams).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatches between dense grids inside the numeric kernels.
class ShapeError : public std::logic_error {
public:
    explicit ShapeError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace eqstream
