#pragma once

#include <stdexcept>
#include <string>

namespace rpimon {

// Malformed or inconsistent user input (scenario files, traces, flags).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rpimon
