#pragma once

#include <stdexcept>
#include <string>

namespace crowdsynth {

/// Base of every error raised by the library. `kind()` is a stable short tag
/// ("invalid-geometry", "not-found", ...) that callers may switch on.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define CROWDSYNTH_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& message) : Error(tag, message) {}      \
  }

CROWDSYNTH_DEFINE_ERROR(InvalidGeometry, "invalid-geometry");
CROWDSYNTH_DEFINE_ERROR(NotFound, "not-found");
CROWDSYNTH_DEFINE_ERROR(InvalidInput, "invalid-input");
CROWDSYNTH_DEFINE_ERROR(ConfigError, "config");
CROWDSYNTH_DEFINE_ERROR(ParseError, "parse");
CROWDSYNTH_DEFINE_ERROR(SchemaError, "schema");
CROWDSYNTH_DEFINE_ERROR(IntegrityError, "integrity");
CROWDSYNTH_DEFINE_ERROR(InvalidPatch, "invalid-patch");
CROWDSYNTH_DEFINE_ERROR(IoError, "io");

#undef CROWDSYNTH_DEFINE_ERROR

}  // namespace crowdsynth
