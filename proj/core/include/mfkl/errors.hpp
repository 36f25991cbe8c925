#pragma once

#include <stdexcept>
#include <string>

namespace mfkl {

// Error taxonomy shared by the library and the CLI. The CLI maps each class
// to a distinct process exit code (config 2, data 3, numerical 4).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mfkl
