#pragma once

#include <stdexcept>
#include <string>

namespace eql {

enum class ErrorCode {
  InvalidArgument = 1,
  DimensionMismatch = 2,
  NonFinite = 3,
  Diverged = 4,
  Io = 5,
  Parse = 6,
  EmptyPartition = 7,
  Internal = 99,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so that
// the C API can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace eql
