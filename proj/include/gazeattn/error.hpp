#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gazeattn {

enum class ErrorKind {
  FrameMismatch,
  DegenerateRay,
  InsufficientData,
  DegenerateDesign,
  Separation,
  InvalidModel,
  ConfigInvalid,
  UnknownSession,
  InvalidState,
  EmptySample,
  Protocol,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FrameMismatch: return "frame-mismatch";
    case ErrorKind::DegenerateRay: return "degenerate-ray";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::DegenerateDesign: return "degenerate-design";
    case ErrorKind::Separation: return "separation";
    case ErrorKind::InvalidModel: return "invalid-model";
    case ErrorKind::ConfigInvalid: return "config-invalid";
    case ErrorKind::UnknownSession: return "unknown-session";
    case ErrorKind::InvalidState: return "invalid-state";
    case ErrorKind::EmptySample: return "empty-sample";
    case ErrorKind::Protocol: return "protocol";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gazeattn
