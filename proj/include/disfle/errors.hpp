#pragma once

#include <stdexcept>
#include <string>

namespace disfle {

/// Bad configuration or usage: wrong flags, malformed model spec, unknown
/// codes in a rule file. Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Data or numeric failure at run time: unparseable input, non-convergence,
/// singular information. Maps to exit code 1 in the CLI.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace disfle
