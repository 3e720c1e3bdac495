#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nmtune {

enum class ErrorKind {
  kInvalidInput,
  kDegenerateSample,
  kZeroSpectrum,
  kShapeError,
  kDegenerateTopSingularValue,
  kLabelError,
  kTrainingDiverged,
  kCannotFlip,
  kMissingArtifact,
  kBadMagic,
  kUnsupportedVersion,
  kCrcMismatch,
  kTruncatedFile,
  kProviderError,
  kConfigError,
  kIoError,
};

std::string_view to_string(ErrorKind kind);

/// Whether an error stems from bad numerics (as opposed to bad data or
/// configuration). Drives the CLI exit code.
bool is_numeric(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace nmtune
