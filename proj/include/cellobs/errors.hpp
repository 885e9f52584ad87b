#pragma once

#include <stdexcept>
#include <string>

namespace cellobs {

// File/table content that cannot be parsed; message carries the 1-based row
// index of the offending line where applicable.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration value or key; message names the key.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cellobs
