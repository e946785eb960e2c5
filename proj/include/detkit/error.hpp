#pragma once

#include <stdexcept>
#include <string>

namespace detkit {

// Base for every error the library raises. `kind()` is a stable tag used by
// the CLI to pick exit codes and by tests to assert on the failure class.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DETKIT_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

DETKIT_DEFINE_ERROR(InvalidBox)
DETKIT_DEFINE_ERROR(InvalidArgument)
DETKIT_DEFINE_ERROR(CellMismatch)
DETKIT_DEFINE_ERROR(OutOfBounds)
DETKIT_DEFINE_ERROR(InsufficientSamples)
DETKIT_DEFINE_ERROR(NotDivisible)
DETKIT_DEFINE_ERROR(UnknownImage)
DETKIT_DEFINE_ERROR(ParseError)
DETKIT_DEFINE_ERROR(ValidationError)

#undef DETKIT_DEFINE_ERROR

}  // namespace detkit
