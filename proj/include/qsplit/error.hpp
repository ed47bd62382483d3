#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qsplit {

enum class ErrorKind {
  NonPositiveWidth,
  AsymmetricPotential,
  InvalidArgument,
  NumericalOverflow,
  SolveSingular,
  NotNormalized,
  OddSelectionFailed,
  SpectrumDomainError,
  GridTooCoarse,
  ZeroNorm,
  BoundaryContamination,
  GridMismatch,
  ZeroFlux,
  ExtrapolationDiverged,
  PrematureReadout,
  SchemaError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonPositiveWidth: return "NonPositiveWidth";
    case ErrorKind::AsymmetricPotential: return "AsymmetricPotential";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NumericalOverflow: return "NumericalOverflow";
    case ErrorKind::SolveSingular: return "SolveSingular";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::OddSelectionFailed: return "OddSelectionFailed";
    case ErrorKind::SpectrumDomainError: return "SpectrumDomainError";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::ZeroNorm: return "ZeroNorm";
    case ErrorKind::BoundaryContamination: return "BoundaryContamination";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::ZeroFlux: return "ZeroFlux";
    case ErrorKind::ExtrapolationDiverged: return "ExtrapolationDiverged";
    case ErrorKind::PrematureReadout: return "PrematureReadout";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a kind and the name of the
/// operation that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string operation, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + " in " + operation + ": " + message),
        kind_(kind),
        operation_(std::move(operation)),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& operation() const noexcept { return operation_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string operation_;
  std::string detail_;
};

}  // namespace qsplit
