#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maven {

enum class ErrorCode {
  ShapeMismatch,
  NonFinite,
  NotScalar,
  DetachedGraph,
  IndivisibleExtent,
  AudioTooShort,
  TokenOutOfVocab,
  SequenceTooLong,
  LengthMismatch,
  EmptyBatch,
  DegenerateVariance,
  DegenerateDenominator,
  IoFailure,
  MissingClip,
  EmptyKeepSet,
  DivergedLoss,
  GradCheckFailed,
  CheckpointMismatch,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

// Exit-code class for the CLI: 2 = data error, 3 = numeric failure.
int exit_class(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace maven
