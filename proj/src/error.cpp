#include "tapestry/error.hpp"

namespace tapestry {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "io";
    case ErrorCode::MalformedGeometry: return "malformed-geometry";
    case ErrorCode::EmptyMesh: return "empty-mesh";
    case ErrorCode::NotBakeable: return "not-bakeable";
    case ErrorCode::DegenerateMesh: return "degenerate-mesh";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::ResolutionMismatch: return "resolution-mismatch";
    case ErrorCode::GeometryMismatch: return "geometry-mismatch";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::MalformedResponse: return "malformed-response";
    case ErrorCode::Transport: return "transport";
    case ErrorCode::RemoteJob: return "remote-job";
  }
  return "unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::MalformedGeometry:
    case ErrorCode::EmptyMesh:
    case ErrorCode::NotBakeable:
    case ErrorCode::DegenerateMesh:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ResolutionMismatch:
      return true;
    default:
      return false;
  }
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

} // namespace tapestry
