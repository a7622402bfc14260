#pragma once

#include <stdexcept>
#include <string>

namespace patchservo {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PATCHSERVO_DEFINE_ERROR(Name)                 \
  class Name : public Error {                         \
   public:                                            \
    explicit Name(const std::string& what_arg)        \
        : Error(std::string(#Name ": ") + what_arg) {} \
  }

PATCHSERVO_DEFINE_ERROR(NonPositiveDepth);
PATCHSERVO_DEFINE_ERROR(DegenerateLookAt);
PATCHSERVO_DEFINE_ERROR(CameraInPlane);
PATCHSERVO_DEFINE_ERROR(EmptyImage);
PATCHSERVO_DEFINE_ERROR(BridgeUnavailable);
PATCHSERVO_DEFINE_ERROR(CellOutOfBounds);
PATCHSERVO_DEFINE_ERROR(NoEligibleCells);
PATCHSERVO_DEFINE_ERROR(DimensionMismatch);
PATCHSERVO_DEFINE_ERROR(InsufficientMatches);
PATCHSERVO_DEFINE_ERROR(InvalidDepth);
PATCHSERVO_DEFINE_ERROR(DegenerateTrajectory);
PATCHSERVO_DEFINE_ERROR(DegenerateBaseline);
PATCHSERVO_DEFINE_ERROR(ConfigError);
PATCHSERVO_DEFINE_ERROR(ImageIoError);

#undef PATCHSERVO_DEFINE_ERROR

}  // namespace patchservo
