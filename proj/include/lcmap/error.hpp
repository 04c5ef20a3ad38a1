#pragma once

#include <stdexcept>
#include <string>

namespace lcmap {

/// Broad failure categories. The C API maps each one onto a status code.
enum class ErrorKind {
  InvalidArgument,
  Io,
  Format,
  Config,
  Contract,
  Degenerate,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lcmap
