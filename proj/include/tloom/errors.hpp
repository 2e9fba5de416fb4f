#pragma once

#include <stdexcept>
#include <string>

namespace tloom {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape/rank contract violations (mismatched operands, bad reshape, ...).
struct ShapeError : Error {
  using Error::Error;
};

/// Out-of-range index or over-long index vector.
struct BoundsError : ShapeError {
  using ShapeError::ShapeError;
};

/// Malformed input bytes (IDX files, checkpoints).
struct FormatError : Error {
  using Error::Error;
};

/// Well-formed container holding an out-of-domain value.
struct ValueError : FormatError {
  using FormatError::FormatError;
};

}  // namespace tloom
