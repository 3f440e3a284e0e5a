#include "lexdraft/error.hpp"

namespace lexdraft {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidEncoding: return "InvalidEncoding";
    case ErrorCode::kEmptyDocument: return "EmptyDocument";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kInvalidId: return "InvalidId";
    case ErrorCode::kIncompleteLexicon: return "IncompleteLexicon";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kUnreachable: return "Unreachable";
    case ErrorCode::kBadResponse: return "BadResponse";
    case ErrorCode::kVocabMismatch: return "VocabMismatch";
    case ErrorCode::kEncodingError: return "EncodingError";
    case ErrorCode::kSpanOutOfRange: return "SpanOutOfRange";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kBadFormat: return "BadFormat";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace lexdraft
