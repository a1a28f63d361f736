#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace parity {

/// Failure categories. The CLI prints the category name as the first token of
/// its single-line error message, so these names are part of the interface.
enum class ErrorKind {
  Parse,
  Referential,
  Range,
  Gap,
  EmptyInput,
  Config,
  Dimension,
  Domain,
  SampleSize,
  SingularDesign,
  Divergence,
  Kink,
  MissingUnit,
  Degenerate,
  Io,
  Internal,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace parity
