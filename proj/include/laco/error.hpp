#pragma once

#include <stdexcept>
#include <string>

namespace laco {

// Mismatched operand shapes and divisibility violations.
struct ShapeError : std::invalid_argument {
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid run configuration (CLI flags, config files, bad module parameters).
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// A stated contract was violated at runtime (non-scalar backward target,
// non-finite loss, gradient lookups on the wrong tape).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures while reading configs or emitting artifacts.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace laco
