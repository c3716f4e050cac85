#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace multicfv {

enum class ErrorKind {
  NonHexInput,
  DimensionMismatch,
  MalformedAst,
  Duplicate,
  NotFound,
  IoError,
  TooFewSamples,
  EmptyDataset,
  DegenerateLabels,
  ModelMissing,
  InvalidArgument,
  ConfigError,
  CorruptFile,
};

std::string_view to_string(ErrorKind kind);

// Every recoverable failure in the library surfaces as this exception; the
// kind lets callers (and the CLI's exit-code mapping) branch without string
// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace multicfv
