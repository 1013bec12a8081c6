#include "flexasm/error.hpp"

namespace flexasm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::IllPosedLoop: return "IllPosedLoop";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::DuplicateChannel: return "DuplicateChannel";
    case ErrorCode::SingularDBlock: return "SingularDBlock";
    case ErrorCode::NonSquareSelection: return "NonSquareSelection";
    case ErrorCode::UnstableSystem: return "UnstableSystem";
    case ErrorCode::NonzeroFeedthrough: return "NonzeroFeedthrough";
    case ErrorCode::MarginalModeObservable: return "MarginalModeObservable";
    case ErrorCode::InvalidModalData: return "InvalidModalData";
    case ErrorCode::UnknownPort: return "UnknownPort";
    case ErrorCode::SingularInertia: return "SingularInertia";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::InvalidDcm: return "InvalidDcm";
    case ErrorCode::InvalidMode: return "InvalidMode";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnitError: return "UnitError";
    case ErrorCode::DisconnectedLayout: return "DisconnectedLayout";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::UnknownPoint: return "UnknownPoint";
    case ErrorCode::JointOutOfRange: return "JointOutOfRange";
    case ErrorCode::IkNotConverged: return "IkNotConverged";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::MissingStructureData: return "MissingStructureData";
    case ErrorCode::StateInvalid: return "StateInvalid";
    case ErrorCode::NominalUnstable: return "NominalUnstable";
    case ErrorCode::LayoutError: return "LayoutError";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace flexasm
