#pragma once

#include <stdexcept>
#include <string>

namespace ebip {

/// Broad failure category. The CLI maps these onto process exit codes.
enum class ErrorKind { config, data, numerical };

/// Exception carrying a stable machine-readable code (e.g. "ensemble_size")
/// alongside the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline Error config_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::config, std::move(code), msg);
}
inline Error data_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::data, std::move(code), msg);
}
inline Error numerical_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::numerical, std::move(code), msg);
}

}  // namespace ebip
