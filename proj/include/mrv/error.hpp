#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrv {

enum class ErrorKind {
  ZeroVector,
  RaggedInput,
  NonPositiveRadius,
  DegenerateSample,
  TooFewExceedances,
  OptimizerFailure,
  NoAdmissibleK,
  TooFewValues,
  LengthMismatch,
  InvalidModel,
  ZeroCoefficients,
  NonPositiveQuadraticForm,
  TooFewObservations,
  ManualKNotAdmissible,
  NotPositiveDefinite,
  FileNotFound,
  NonNumericCell,
  NonPositivePrice,
  InvalidConfig,
  ParseError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::RaggedInput: return "RaggedInput";
    case ErrorKind::NonPositiveRadius: return "NonPositiveRadius";
    case ErrorKind::DegenerateSample: return "DegenerateSample";
    case ErrorKind::TooFewExceedances: return "TooFewExceedances";
    case ErrorKind::OptimizerFailure: return "OptimizerFailure";
    case ErrorKind::NoAdmissibleK: return "NoAdmissibleK";
    case ErrorKind::TooFewValues: return "TooFewValues";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::ZeroCoefficients: return "ZeroCoefficients";
    case ErrorKind::NonPositiveQuadraticForm: return "NonPositiveQuadraticForm";
    case ErrorKind::TooFewObservations: return "TooFewObservations";
    case ErrorKind::ManualKNotAdmissible: return "ManualKNotAdmissible";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::NonNumericCell: return "NonNumericCell";
    case ErrorKind::NonPositivePrice: return "NonPositivePrice";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mrv
