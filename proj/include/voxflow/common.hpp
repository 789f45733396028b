// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace voxflow {

// Error taxonomy. Contract violations map to CLI exit code 2,
// numeric failures (NaN loss, diverged solve) to exit code 3.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ContractError : public Error {
  public:
    using Error::Error;
};

// Coordinate outside the addressable span of the tree.
class RangeError : public ContractError {
  public:
    using ContractError::ContractError;
};

class NumericError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

#define VF_CHECK(cond, msg)                                                 \
    do {                                                                    \
        if (!(cond)) {                                                      \
            std::ostringstream oss_;                                        \
            oss_ << msg;                                                    \
            throw ::voxflow::ContractError(oss_.str());                     \
        }                                                                   \
    } while (0)

#define VF_CHECK_RANGE(cond, msg)                                           \
    do {                                                                    \
        if (!(cond)) {                                                      \
            std::ostringstream oss_;                                        \
            oss_ << msg;                                                    \
            throw ::voxflow::RangeError(oss_.str());                        \
        }                                                                   \
    } while (0)

#define VF_CHECK_NUMERIC(cond, msg)                                         \
    do {                                                                    \
        if (!(cond)) {                                                      \
            std::ostringstream oss_;                                        \
            oss_ << msg;                                                    \
            throw ::voxflow::NumericError(oss_.str());                      \
        }                                                                   \
    } while (0)

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Controlled by the VOXFLOW_LOG environment variable: error|info|debug.
inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("VOXFLOW_LOG");
        if (!env) return LogLevel::kError;
        std::string s(env);
        if (s == "debug") return LogLevel::kDebug;
        if (s == "info") return LogLevel::kInfo;
        return LogLevel::kError;
    }();
    return level;
}

#define VF_LOG(level, msg)                                                  \
    do {                                                                    \
        if (static_cast<int>(::voxflow::log_level()) >=                     \
            static_cast<int>(::voxflow::LogLevel::level)) {                 \
            std::cerr << "[voxflow] " << msg << "\n";                       \
        }                                                                   \
    } while (0)

#define VF_INFO(msg) VF_LOG(kInfo, msg)
#define VF_DEBUG(msg) VF_LOG(kDebug, msg)

// Operator parallelism cap (CLI --threads). 0 means "hardware default".
void set_max_threads(int n);
int max_threads();

}  // namespace voxflow
