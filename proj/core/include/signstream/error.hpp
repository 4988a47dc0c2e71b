#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace signstream {

enum class ErrorCode {
  // landmarks
  WrongArity,
  NonFinite,
  MissingField,
  DegenerateFrame,
  // neuralnet
  ShapeMismatch,
  LabelOutOfRange,
  EmptyDataset,
  VersionMismatch,
  CorruptModel,
  // gloss
  Timeout,
  MalformedReply,
  // retrieval
  UnknownToken,
  RemoteFailure,
  DimensionMismatch,
  EmptyStore,
  UnsupportedCharacter,
  LayoutMismatch,
  FpsMismatch,
  DuplicateGloss,
  MissingLetterPose,
  FormatError,
  // shared
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace signstream
