#pragma once

#include <stdexcept>
#include <string>

namespace zsncd {

enum class ErrorCode {
  kIo,
  kMalformedHeader,
  kTruncatedPayload,
  kUnsupportedMaxval,
  kShapeMismatch,
  kInvalidArgument,
  kOutOfRange,
  kBadMagic,
  kVersionMismatch,
  kChecksumMismatch,
  kTruncatedCheckpoint,
  kTrainingDiverged,
  kUncoveredPixel,
  kInvalidCodebook,
};

const char* to_string(ErrorCode code);

/// Every failure in the toolkit is raised as this exception; callers
/// dispatch on code() rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when training produces a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(long step, const std::string& what)
      : Error(ErrorCode::kTrainingDiverged, what), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace zsncd
