#pragma once

#include <stdexcept>

namespace evekf {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geometry
struct NotARotation : Error { using Error::Error; };
struct NotSkew : Error { using Error::Error; };
struct BehindCamera : Error { using Error::Error; };
struct RayParallelToPlane : Error { using Error::Error; };
struct OutsideMap : Error { using Error::Error; };

// scene map
struct EmptyImage : Error { using Error::Error; };
struct NoVisiblePixels : Error { using Error::Error; };
struct InsufficientSupport : Error { using Error::Error; };

// event model
struct NonPositiveDepth : Error { using Error::Error; };
struct TooFewEvents : Error { using Error::Error; };
struct DegenerateHistogram : Error { using Error::Error; };

// simulator
struct NonMonotoneTimestamp : Error { using Error::Error; };

// filter
struct DegenerateInnovationCovariance : Error { using Error::Error; };
struct FilterDivergence : Error { using Error::Error; };

// harness
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct NoOverlap : DataError { using DataError::DataError; };

}  // namespace evekf
