#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lexdraft {

enum class ErrorCode {
  kInvalidEncoding,
  kEmptyDocument,
  kDuplicateId,
  kEmptyCorpus,
  kInvalidId,
  kIncompleteLexicon,
  kNonFiniteLoss,
  kUnreachable,
  kBadResponse,
  kVocabMismatch,
  kEncodingError,
  kSpanOutOfRange,
  kBadConfig,
  kBadFormat,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lexdraft
