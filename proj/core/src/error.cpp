#include "signstream/error.hpp"

namespace signstream {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::WrongArity: return "WrongArity";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::DegenerateFrame: return "DegenerateFrame";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedReply: return "MalformedReply";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::RemoteFailure: return "RemoteFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::UnsupportedCharacter: return "UnsupportedCharacter";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::FpsMismatch: return "FpsMismatch";
    case ErrorCode::DuplicateGloss: return "DuplicateGloss";
    case ErrorCode::MissingLetterPose: return "MissingLetterPose";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace signstream
