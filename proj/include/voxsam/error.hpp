#pragma once

#include <stdexcept>
#include <string>

namespace voxsam {

enum class ErrorKind {
  InvalidShape,
  NotRegistered,
  NumericalFailure,
  NoProjection,
  IoError,
  ConfigError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::NotRegistered: return "NotRegistered";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::NoProjection: return "NoProjection";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

inline void require(bool cond, ErrorKind k, const std::string& msg) {
  if (!cond) raise(k, msg);
}

}  // namespace voxsam
