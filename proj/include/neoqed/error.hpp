#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace neoqed {

enum class ErrorKind {
  InvalidDimension,
  DimensionMismatch,
  NotHermitian,
  InvalidSpec,
  Integration,
  Fit,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception; `kind` is what the CLI reports in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace neoqed
