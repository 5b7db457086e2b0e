#pragma once

#include <stdexcept>
#include <string>

namespace aircast {

// Error categories map 1:1 onto CLI exit codes (see tools/).
//   UsageError   -> 2   bad flags, unknown presets, conflicting options
//   DataError    -> 3   missing/malformed files, shape or cadence mismatches
//   NumericError -> 4   NaN/Inf where finite values are required
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitData = 3,
    kExitNumeric = 4,
};

}  // namespace aircast
