#pragma once

#include <stdexcept>
#include <string>

namespace ncstokes {

/// Bad user-supplied configuration (predicates, flags, config files).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Degenerate or inconsistent geometry.
struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A construction-time self-check failed; indicates a transcription bug in
/// the element tables, not a user error.
struct InternalError : std::logic_error {
  explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

/// Linear solver broke down (singular system, stagnation, iteration cap).
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested capability beyond what the library commits to.
struct UnsupportedError : std::runtime_error {
  explicit UnsupportedError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ncstokes
