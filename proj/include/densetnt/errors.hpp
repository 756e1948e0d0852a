#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace densetnt {

enum class ErrorCode {
  kDegenerateHeading,
  kAlreadyNormalized,
  kNotNormalized,
  kMalformedPolyline,
  kParse,
  kNoLanesInRange,
  kEmptyCandidates,
  kEmptyHeatmap,
  kNonFiniteValue,
  kShapeMismatch,
  kInvalidConfig,
  kCombinationBound,
  kLengthMismatch,
  kEmptyInput,
  kDivergence,
  kMissingCheckpoint,
  kIo,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateHeading: return "degenerate-heading";
    case ErrorCode::kAlreadyNormalized: return "already-normalized";
    case ErrorCode::kNotNormalized: return "not-normalized";
    case ErrorCode::kMalformedPolyline: return "malformed-polyline";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kNoLanesInRange: return "no-lanes-in-range";
    case ErrorCode::kEmptyCandidates: return "empty-candidates";
    case ErrorCode::kEmptyHeatmap: return "empty-heatmap";
    case ErrorCode::kNonFiniteValue: return "non-finite-value";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kCombinationBound: return "combination-bound";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kMissingCheckpoint: return "missing-checkpoint";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown";
}

/// Every module reports failures through this exception. `code()` is stable
/// and what tests match against; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace densetnt
