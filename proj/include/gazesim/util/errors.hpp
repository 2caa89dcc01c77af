#pragma once

#include <stdexcept>
#include <string>

namespace gazesim {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / index problems.
struct DimError : Error {
    explicit DimError(const std::string& msg) : Error(msg) {}
};

// Bad configuration values or unknown config keys.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Malformed or inconsistent input data (files, detections, gaze traces).
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// A pipeline stage was invoked before its inputs exist.
struct PrereqError : Error {
    explicit PrereqError(const std::string& msg) : Error(msg) {}
};

}  // namespace gazesim
