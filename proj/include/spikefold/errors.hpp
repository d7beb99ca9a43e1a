#pragma once

#include <stdexcept>
#include <string>

namespace spikefold {

// Shape or granularity disagreement between operands.
struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Bad argument values (empty input, label out of range, nonpositive width, ...).
struct InputError : std::invalid_argument {
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed file: wrong magic, wrong version, truncated payload.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// File payload fails its checksum or is cut short.
struct CorruptionError : std::runtime_error {
  explicit CorruptionError(const std::string& what) : std::runtime_error(what) {}
};

// Folding precondition violated (coefficient layer without an adjacent consumer).
struct TopologyError : std::runtime_error {
  explicit TopologyError(const std::string& what) : std::runtime_error(what) {}
};

// Training loss became non-finite.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spikefold
