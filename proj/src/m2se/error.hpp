#pragma once

#include <stdexcept>
#include <string>

namespace m2se {

// Numeric values mirror m2se_status in include/m2se/m2se.h.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kIo = 2,
  kBadMagic = 3,
  kVersionMismatch = 4,
  kTruncated = 5,
  kNonFinite = 6,
  kDimensionMismatch = 7,
  kEstimationFailed = 8,
  kTrainingDiverged = 9,
  kInternal = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace m2se
