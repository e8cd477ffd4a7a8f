#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qgraph {

enum class Errc {
  ParseError,
  UnknownId,
  InvalidArgument,
  DisconnectedGraph,
  NonpositiveLength,
  DirichletAtInternalVertex,
  DuplicateId,
  OffsetOutOfRange,
  PartitionNotCovering,
  AlphaSumMismatch,
  DirichletGlue,
  EpsilonTooLarge,
  NonpositiveK,
  RobinNotSupportedOnTorus,
  WeylCountMismatch,
  NoConvergence,
  NullSpaceDimensionMismatch,
  CoordinateOutOfRange,
  CircleExcluded,
  NoPointFound,
  PathThroughDegeneracy,
  DimensionTooLarge,
  DimensionNot3,
  MixedSignAtSmoothCell,
  IoError,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownId: return "UnknownId";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DisconnectedGraph: return "DisconnectedGraph";
    case Errc::NonpositiveLength: return "NonpositiveLength";
    case Errc::DirichletAtInternalVertex: return "DirichletAtInternalVertex";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::OffsetOutOfRange: return "OffsetOutOfRange";
    case Errc::PartitionNotCovering: return "PartitionNotCovering";
    case Errc::AlphaSumMismatch: return "AlphaSumMismatch";
    case Errc::DirichletGlue: return "DirichletGlue";
    case Errc::EpsilonTooLarge: return "EpsilonTooLarge";
    case Errc::NonpositiveK: return "NonpositiveK";
    case Errc::RobinNotSupportedOnTorus: return "RobinNotSupportedOnTorus";
    case Errc::WeylCountMismatch: return "WeylCountMismatch";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::NullSpaceDimensionMismatch: return "NullSpaceDimensionMismatch";
    case Errc::CoordinateOutOfRange: return "CoordinateOutOfRange";
    case Errc::CircleExcluded: return "CircleExcluded";
    case Errc::NoPointFound: return "NoPointFound";
    case Errc::PathThroughDegeneracy: return "PathThroughDegeneracy";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::DimensionNot3: return "DimensionNot3";
    case Errc::MixedSignAtSmoothCell: return "MixedSignAtSmoothCell";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

// Failures of a numerical self-check, as opposed to bad input.
constexpr bool is_numerical_failure(Errc code) noexcept {
  switch (code) {
    case Errc::WeylCountMismatch:
    case Errc::NoConvergence:
    case Errc::NullSpaceDimensionMismatch:
    case Errc::NoPointFound:
    case Errc::PathThroughDegeneracy:
    case Errc::MixedSignAtSmoothCell:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace qgraph
