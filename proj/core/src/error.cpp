#include "nmtune/error.hpp"

namespace nmtune {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "InvalidInput";
    case ErrorKind::kDegenerateSample: return "DegenerateSample";
    case ErrorKind::kZeroSpectrum: return "ZeroSpectrum";
    case ErrorKind::kShapeError: return "ShapeError";
    case ErrorKind::kDegenerateTopSingularValue: return "DegenerateTopSingularValue";
    case ErrorKind::kLabelError: return "LabelError";
    case ErrorKind::kTrainingDiverged: return "TrainingDiverged";
    case ErrorKind::kCannotFlip: return "CannotFlip";
    case ErrorKind::kMissingArtifact: return "MissingArtifact";
    case ErrorKind::kBadMagic: return "BadMagic";
    case ErrorKind::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::kCrcMismatch: return "CrcMismatch";
    case ErrorKind::kTruncatedFile: return "TruncatedFile";
    case ErrorKind::kProviderError: return "ProviderError";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

bool is_numeric(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kZeroSpectrum:
    case ErrorKind::kDegenerateTopSingularValue:
    case ErrorKind::kTrainingDiverged:
    case ErrorKind::kDegenerateSample:
      return true;
    default:
      return false;
  }
}

}  // namespace nmtune
