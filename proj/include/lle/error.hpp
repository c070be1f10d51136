#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lle {

enum class Errc {
  EmptyCloud,
  DegenerateCloud,
  NegativeSigma,
  NonPositiveVoxel,
  UnknownKind,
  DimMismatch,
  NonFiniteValue,
  ZeroSum,
  NegativeValue,
  ZeroNorm,
  NoKnownCategories,
  MissingRepresentation,
  DuplicateRep,
  UnknownRep,
  InsufficientDataset,
  EmptyWindow,
  TraceMismatch,
  TooFewViews,
  CountTooLarge,
  ParseError,
  UnsupportedFormat,
  SchemaError,
  IoError,
  InvalidArgument,
};

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::EmptyCloud: return "EmptyCloud";
    case Errc::DegenerateCloud: return "DegenerateCloud";
    case Errc::NegativeSigma: return "NegativeSigma";
    case Errc::NonPositiveVoxel: return "NonPositiveVoxel";
    case Errc::UnknownKind: return "UnknownKind";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::ZeroSum: return "ZeroSum";
    case Errc::NegativeValue: return "NegativeValue";
    case Errc::ZeroNorm: return "ZeroNorm";
    case Errc::NoKnownCategories: return "NoKnownCategories";
    case Errc::MissingRepresentation: return "MissingRepresentation";
    case Errc::DuplicateRep: return "DuplicateRep";
    case Errc::UnknownRep: return "UnknownRep";
    case Errc::InsufficientDataset: return "InsufficientDataset";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::TraceMismatch: return "TraceMismatch";
    case Errc::TooFewViews: return "TooFewViews";
    case Errc::CountTooLarge: return "CountTooLarge";
    case Errc::ParseError: return "ParseError";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::SchemaError: return "SchemaError";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lle
