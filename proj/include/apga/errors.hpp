#pragma once

#include <stdexcept>
#include <string>

namespace apga {

// Error taxonomy used across the library. The CLI maps config_error to
// exit code 2 and everything else to exit code 1.
struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/operand shapes do not satisfy an operation's contract.
struct shape_error : error {
  explicit shape_error(const std::string& msg) : error(msg) {}
};

// API called out of sequence (e.g. backward without a recorded forward).
struct usage_error : error {
  explicit usage_error(const std::string& msg) : error(msg) {}
};

// Non-finite values where finite ones are required.
struct numeric_error : error {
  explicit numeric_error(const std::string& msg) : error(msg) {}
};

struct io_error : error {
  explicit io_error(const std::string& msg) : error(msg) {}
};

struct config_error : error {
  explicit config_error(const std::string& msg) : error(msg) {}
};

}  // namespace apga
