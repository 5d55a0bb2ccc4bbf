#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace armsim {

enum class ErrorCode {
  // bus
  BadName,
  KindMismatch,
  InvalidMessage,
  // urdf
  XmlError,
  MissingField,
  BadNumber,
  UnsupportedJoint,
  UnknownLink,
  UnreachableLink,
  // kinematics
  DimensionMismatch,
  Unreachable,
  InvalidArgument,
  // controllers / sim
  ParseError,
  UnknownControllerType,
  MissingTransmission,
  UnknownJoint,
  InvalidConfig,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadName: return "BadName";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::InvalidMessage: return "InvalidMessage";
    case ErrorCode::XmlError: return "XmlError";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::BadNumber: return "BadNumber";
    case ErrorCode::UnsupportedJoint: return "UnsupportedJoint";
    case ErrorCode::UnknownLink: return "UnknownLink";
    case ErrorCode::UnreachableLink: return "UnreachableLink";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownControllerType: return "UnknownControllerType";
    case ErrorCode::MissingTransmission: return "MissingTransmission";
    case ErrorCode::UnknownJoint: return "UnknownJoint";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library. `subject()` names the offending
/// entity (topic, joint, link, attribute) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string subject, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        subject_(std::move(subject)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

}  // namespace armsim
