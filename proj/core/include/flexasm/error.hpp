#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flexasm {

enum class ErrorCode {
  WidthMismatch,
  IllPosedLoop,
  UnknownChannel,
  DuplicateChannel,
  SingularDBlock,
  NonSquareSelection,
  UnstableSystem,
  NonzeroFeedthrough,
  MarginalModeObservable,
  InvalidModalData,
  UnknownPort,
  SingularInertia,
  AlphaOutOfRange,
  InvalidDcm,
  InvalidMode,
  ParseError,
  SchemaError,
  UnitError,
  DisconnectedLayout,
  EigenFailure,
  UnknownPoint,
  JointOutOfRange,
  IkNotConverged,
  NegativeCount,
  MissingStructureData,
  StateInvalid,
  NominalUnstable,
  LayoutError,
  Unreachable,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Exception type used throughout the library.  The code identifies the
/// failure class; the message carries the details.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace flexasm
