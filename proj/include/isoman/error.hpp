#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace isoman {

enum class ErrorCode {
  // validation
  UnknownModel,
  UnknownParameter,
  InvalidArgument,
  OutOfRange,
  PairSplit,
  GridMismatch,
  MissingColumn,
  OrderTooHigh,
  OrderUnavailable,
  // numerical
  NonFinite,
  NonDiagonalizable,
  Singular,
  StepLimitExceeded,
  BlowUp,
  FDUnreliable,
  NoConvergence,
  UnstableFixedPoint,
  BasinEscape,
  HorizonExceeded,
  Resonance,
  IllConditioned,
  DegenerateFastBasis,
  AbortOnDivergence,
  InsufficientCoverage,
  DomainExit,
  NotSettled,
  NoBifurcationInRange,
  OutOfValidityRadius,
};

std::string_view to_string(ErrorCode code);

// True for errors caused by bad user input rather than numerical failure.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json details = nlohmann::json::object());

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }
  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

}  // namespace isoman
