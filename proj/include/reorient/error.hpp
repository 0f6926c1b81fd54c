#pragma once

#include <stdexcept>
#include <string>

namespace reorient {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define REORIENT_DECLARE_ERROR(Name)         \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(std::string(#Name ": ") + what) {} \
  }

REORIENT_DECLARE_ERROR(ZeroNorm);
REORIENT_DECLARE_ERROR(UndefinedAxis);
REORIENT_DECLARE_ERROR(ParseError);
REORIENT_DECLARE_ERROR(EmptyMesh);
REORIENT_DECLARE_ERROR(OutOfFrustum);
REORIENT_DECLARE_ERROR(NoObjectPixels);
REORIENT_DECLARE_ERROR(IoError);
REORIENT_DECLARE_ERROR(ConstraintViolation);
REORIENT_DECLARE_ERROR(TooFewObjects);
REORIENT_DECLARE_ERROR(DegenerateCloud);
REORIENT_DECLARE_ERROR(ShapeMismatch);
REORIENT_DECLARE_ERROR(ConfigError);

#undef REORIENT_DECLARE_ERROR

}  // namespace reorient
