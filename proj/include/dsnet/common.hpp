#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace dsnet {

// Virtual time in nanoseconds.
using SimTime = std::int64_t;
using NodeId = std::uint32_t;
using PortIndex = std::uint16_t;
using LpId = std::uint32_t;

inline constexpr SimTime kNanosPerSecond = 1'000'000'000;
inline constexpr SimTime kTimeInfinity = std::numeric_limits<SimTime>::max();

// Malformed input file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input parsed but violates a structural rule (disconnected graph, bad port...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent or impossible configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Internal invariant broken: a simulator bug, never a user error.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// No GVT progress within the configured wall-clock budget.
class WatchdogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void invariant_failed(const char* expr, const char* file, int line, const std::string& msg);

}  // namespace dsnet

#define DSNET_CHECK(cond, msg)                                         \
  do {                                                                 \
    if (!(cond)) ::dsnet::invariant_failed(#cond, __FILE__, __LINE__, (msg)); \
  } while (false)
