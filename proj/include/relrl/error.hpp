#pragma once

#include <stdexcept>
#include <string>

namespace relrl {

enum class ErrorCode {
  invalid_argument = 1,
  dimension,
  validation,
  no_valid_choice,
  no_valid_action,
  state,
  consistency,
  illegal_action,
  unsupported,
  parse,
  io,
  schema,
  mode,
  generation,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace relrl
