#pragma once

#include <stdexcept>
#include <string>

namespace duet {

enum class ErrorCode {
  kInvalidConfig,
  kUnplaceableText,
  kShapeMismatch,
  kNoBackgroundSupport,
  kEmptyStream,
  kCanvasTooSmall,
  kCropTooLarge,
  kParse,
  kMissingFile,
  kChecksumMismatch,
  kIo,
  kCheckpointMismatch,
  kNonFiniteLoss,
};

const char* to_string(ErrorCode code);

// Single exception type for the library. `is_config_error()` separates
// user-fixable configuration problems (CLI exit 2) from runtime failures.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  bool is_config_error() const noexcept {
    return code_ == ErrorCode::kInvalidConfig ||
           code_ == ErrorCode::kUnplaceableText ||
           code_ == ErrorCode::kCheckpointMismatch;
  }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kUnplaceableText: return "unplaceable-text";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kNoBackgroundSupport: return "no-background-support";
    case ErrorCode::kEmptyStream: return "empty-stream";
    case ErrorCode::kCanvasTooSmall: return "canvas-too-small";
    case ErrorCode::kCropTooLarge: return "crop-too-large";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kCheckpointMismatch: return "checkpoint-mismatch";
    case ErrorCode::kNonFiniteLoss: return "non-finite-loss";
  }
  return "unknown";
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace duet
