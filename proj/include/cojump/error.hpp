#pragma once

#include <stdexcept>
#include <string>

namespace cojump {

/// Broad failure category. Maps one-to-one onto CLI exit codes.
enum class ErrorKind {
  io,         // unreadable/missing files, malformed inputs
  config,     // invalid configuration or arguments
  numerical,  // degenerate or undefined numerical results
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return 2;
    case ErrorKind::config: return 3;
    case ErrorKind::numerical: return 4;
  }
  return 1;
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message, std::string path = {})
      : std::runtime_error(message), kind_(kind), code_(std::move(code)), path_(std::move(path)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable identifier, e.g. "ZeroValidRows".
  const std::string& code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorKind kind_;
  std::string code_;
  std::string path_;
};

[[noreturn]] inline void fail_io(std::string code, const std::string& msg, std::string path = {}) {
  throw Error(ErrorKind::io, std::move(code), msg, std::move(path));
}
[[noreturn]] inline void fail_config(std::string code, const std::string& msg) {
  throw Error(ErrorKind::config, std::move(code), msg);
}
[[noreturn]] inline void fail_numerical(std::string code, const std::string& msg) {
  throw Error(ErrorKind::numerical, std::move(code), msg);
}

/// Precondition violations on in-process API calls.
inline void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace cojump
