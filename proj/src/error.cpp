#include "isoman/error.hpp"

namespace isoman {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::UnknownParameter: return "UnknownParameter";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::PairSplit: return "PairSplit";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::OrderTooHigh: return "OrderTooHigh";
    case ErrorCode::OrderUnavailable: return "OrderUnavailable";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NonDiagonalizable: return "NonDiagonalizable";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::StepLimitExceeded: return "StepLimitExceeded";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::FDUnreliable: return "FDUnreliable";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnstableFixedPoint: return "UnstableFixedPoint";
    case ErrorCode::BasinEscape: return "BasinEscape";
    case ErrorCode::HorizonExceeded: return "HorizonExceeded";
    case ErrorCode::Resonance: return "Resonance";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::DegenerateFastBasis: return "DegenerateFastBasis";
    case ErrorCode::AbortOnDivergence: return "AbortOnDivergence";
    case ErrorCode::InsufficientCoverage: return "InsufficientCoverage";
    case ErrorCode::DomainExit: return "DomainExit";
    case ErrorCode::NotSettled: return "NotSettled";
    case ErrorCode::NoBifurcationInRange: return "NoBifurcationInRange";
    case ErrorCode::OutOfValidityRadius: return "OutOfValidityRadius";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownModel:
    case ErrorCode::UnknownParameter:
    case ErrorCode::InvalidArgument:
    case ErrorCode::OutOfRange:
    case ErrorCode::PairSplit:
    case ErrorCode::GridMismatch:
    case ErrorCode::MissingColumn:
    case ErrorCode::OrderTooHigh:
    case ErrorCode::OrderUnavailable:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& message, nlohmann::json details)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), details_(std::move(details)) {}

nlohmann::json Error::to_json() const {
  return {{"error", std::string(to_string(code_))}, {"message", what()}, {"details", details_}};
}

}  // namespace isoman
