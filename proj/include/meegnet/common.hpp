#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace meegnet {

// Forward/backward execution mode. Train mode caches intermediates, updates
// batch-norm moving statistics and samples dropout masks; infer mode is
// deterministic and cache-free.
enum class Mode { train, infer };

// Error taxonomy. The CLI maps these to distinct exit codes.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StateError : std::runtime_error {
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace meegnet
