#pragma once

#include <stdexcept>
#include <string>

namespace survtreeful {

// Error categories map to distinct CLI exit codes (config 2, data 3, numeric 4).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace survtreeful
