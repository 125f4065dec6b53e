#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tapestry {

enum class ErrorCode {
  Io,
  MalformedGeometry,
  EmptyMesh,
  NotBakeable,
  DegenerateMesh,
  InvalidArgument,
  ResolutionMismatch,
  GeometryMismatch,
  Timeout,
  MalformedResponse,
  Transport,
  RemoteJob,
};

std::string_view to_string(ErrorCode code);

// Validation errors stem from bad inputs or configuration; everything else is a
// runtime or provider failure. The CLI maps the two classes to exit codes 1 and 2.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

} // namespace tapestry
