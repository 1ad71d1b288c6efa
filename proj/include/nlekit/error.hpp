#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlekit {

/// Failure categories shared by every module. The CLI maps them onto
/// process exit codes (see tools/main.cpp).
enum class ErrorKind {
  config,
  input,
  data,
  io,
  numeric,
  state,
  persistence,
  range,
  dependency,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace nlekit
