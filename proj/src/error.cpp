#include "bfd/error.hpp"

namespace bfd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kDegenerateSignal: return "DegenerateSignal";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kInvalidClass: return "InvalidClass";
    case ErrorCode::kNotMatFile: return "NotMatFile";
    case ErrorCode::kCompressedUnsupported: return "CompressedUnsupported";
    case ErrorCode::kMalformedElement: return "MalformedElement";
    case ErrorCode::kChannelNotFound: return "ChannelNotFound";
    case ErrorCode::kAmbiguousChannel: return "AmbiguousChannel";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kCorruptModel: return "CorruptModel";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kBufferNotFull: return "BufferNotFull";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kHandshakeFailed: return "HandshakeFailed";
    case ErrorCode::kPeerError: return "PeerError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace bfd
