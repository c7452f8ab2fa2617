#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pcig {

enum class ErrorCode {
  kInvalidPrompt,
  kNoObjectsFound,
  kCountOverflow,
  kLlmProtocolError,
  kLlmTransportError,
  kSchemaVersionMismatch,
  kMalformedPlan,
  kInvalidPlan,
  kDanglingEdge,
  kEmptyGraph,
  kLayoutInfeasible,
  kPnResolutionFailed,
  kBackendUnavailable,
  kMalformedRecord,
  kDuplicateId,
  kMissingVerdict,
  kIoError,
  kConfigError,
  kMalformedRequest,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries a stable code plus an optional
// location (JSON pointer, file:line, endpoint) so callers can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string where = {});

  ErrorCode code() const { return code_; }
  const std::string& where() const { return where_; }

 private:
  ErrorCode code_;
  std::string where_;
};

}  // namespace pcig
