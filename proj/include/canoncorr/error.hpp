#pragma once

#include <stdexcept>
#include <string>

namespace canoncorr {

enum class ErrorKind {
  InvalidInput,
  Underdetermined,
  Degenerate,
  Numeric,
  InsufficientData,
  TrainingFailed,
  Load,
  Reference,
  UnsupportedAnnotation,
  UndefinedSimilarity,
  Io,
  Config,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace canoncorr
