#pragma once

#include <stdexcept>
#include <string>

namespace alphaflops {

// Malformed text input (layer descriptors, key=value files, CLI arguments).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or unusable data (datasets, parameter files, unachievable sweeps,
// resource caps). Distinct from ParseError so the CLI can map usage errors
// and data errors to different exit codes.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace alphaflops
