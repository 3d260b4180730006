#pragma once

#include <stdexcept>
#include <string>

namespace snet {

// Exit-code mapping for the CLI lives in tools/; these types carry intent.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& m) : std::runtime_error(m) {}
};

struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& m) : std::runtime_error(m) {}
};

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace snet
