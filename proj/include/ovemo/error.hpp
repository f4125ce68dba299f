#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ovemo {

enum class ErrorCode {
  kConfig,
  kParse,
  kDuplicateId,
  kEmptyGroundTruth,
  kNonPositiveFrameCount,
  kEmptyAfterNormalization,
  kNoLabelBlock,
  kEmptySet,
  kOutOfRange,
  kEmptyInput,
  kMixedSampleIds,
  kUnknownModelInPriority,
  kMissingBinding,
  kTimeout,
  kTransport,
  kBackend,
  kAttachmentTooLarge,
  kNoScoreFound,
  kUnknownSampleId,
  kDuplicatePrediction,
  kToolMissing,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kEmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::kNonPositiveFrameCount: return "NonPositiveFrameCount";
    case ErrorCode::kEmptyAfterNormalization: return "EmptyAfterNormalization";
    case ErrorCode::kNoLabelBlock: return "NoLabelBlock";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kMixedSampleIds: return "MixedSampleIds";
    case ErrorCode::kUnknownModelInPriority: return "UnknownModelInPriority";
    case ErrorCode::kMissingBinding: return "MissingBinding";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kTransport: return "TransportError";
    case ErrorCode::kBackend: return "BackendError";
    case ErrorCode::kAttachmentTooLarge: return "AttachmentTooLarge";
    case ErrorCode::kNoScoreFound: return "NoScoreFound";
    case ErrorCode::kUnknownSampleId: return "UnknownSampleId";
    case ErrorCode::kDuplicatePrediction: return "DuplicatePrediction";
    case ErrorCode::kToolMissing: return "ToolMissing";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ovemo
