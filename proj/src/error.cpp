#include "pcig/error.hpp"

namespace pcig {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidPrompt: return "INVALID_PROMPT";
    case ErrorCode::kNoObjectsFound: return "NO_OBJECTS_FOUND";
    case ErrorCode::kCountOverflow: return "COUNT_OVERFLOW";
    case ErrorCode::kLlmProtocolError: return "LLM_PROTOCOL_ERROR";
    case ErrorCode::kLlmTransportError: return "LLM_TRANSPORT_ERROR";
    case ErrorCode::kSchemaVersionMismatch: return "SCHEMA_VERSION_MISMATCH";
    case ErrorCode::kMalformedPlan: return "MALFORMED_PLAN";
    case ErrorCode::kInvalidPlan: return "INVALID_PLAN";
    case ErrorCode::kDanglingEdge: return "DANGLING_EDGE";
    case ErrorCode::kEmptyGraph: return "EMPTY_GRAPH";
    case ErrorCode::kLayoutInfeasible: return "LAYOUT_INFEASIBLE";
    case ErrorCode::kPnResolutionFailed: return "PN_RESOLUTION_FAILED";
    case ErrorCode::kBackendUnavailable: return "BACKEND_UNAVAILABLE";
    case ErrorCode::kMalformedRecord: return "MALFORMED_RECORD";
    case ErrorCode::kDuplicateId: return "DUPLICATE_ID";
    case ErrorCode::kMissingVerdict: return "MISSING_VERDICT";
    case ErrorCode::kIoError: return "IO_ERROR";
    case ErrorCode::kConfigError: return "CONFIG_ERROR";
    case ErrorCode::kMalformedRequest: return "MALFORMED_REQUEST";
  }
  return "UNKNOWN";
}

namespace {

std::string compose(ErrorCode code, const std::string& message, const std::string& where) {
  std::string out(error_code_name(code));
  out += ": ";
  out += message;
  if (!where.empty()) {
    out += " (at ";
    out += where;
    out += ")";
  }
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::string where)
    : std::runtime_error(compose(code, message, where)), code_(code), where_(std::move(where)) {}

}  // namespace pcig
