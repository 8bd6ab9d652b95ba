#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace latdyn {

// Exit-code mapping used by the CLI: 2 config, 3 dimension/format, 4 divergence.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DivergenceError : std::runtime_error {
  std::size_t step;
  DivergenceError(std::size_t step_, const std::string& msg)
      : std::runtime_error(msg), step(step_) {}
};

struct FitError : std::runtime_error {
  explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace latdyn
