#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bfd {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  // signal pipeline
  kDegenerateSignal,
  kOutOfRange,
  kInsufficientData,
  kInvalidClass,
  // MAT ingestion
  kNotMatFile,
  kCompressedUnsupported,
  kMalformedElement,
  kChannelNotFound,
  kAmbiguousChannel,
  // tensors and models
  kShapeMismatch,
  kCorruptModel,
  // training
  kEmptySplit,
  kDivergedLoss,
  // streaming
  kBufferNotFull,
  kParseError,
  kHandshakeFailed,
  kPeerError,
};

std::string_view to_string(ErrorCode code);

// All domain failures are reported through this one exception type; callers
// branch on code() rather than on a class hierarchy.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace bfd
