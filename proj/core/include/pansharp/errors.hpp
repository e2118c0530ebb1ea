#pragma once

#include <stdexcept>
#include <string>

namespace pansharp {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An API was called in a way its contract forbids (shape mismatch,
// reused tape, out-of-range argument). Indicates a programming error.
struct ContractViolation : Error {
  using Error::Error;
};

// An operation hit a value outside its numeric domain (division by an
// exactly zero denominator, sqrt of a negative).
struct NumericDomainError : Error {
  using Error::Error;
};

// A computation produced a non-finite value where one is required
// (NaN loss during adaptation).
struct NumericFailure : Error {
  using Error::Error;
};

// A file could not be read, or its header/payload is malformed or
// inconsistent.
struct LoadError : Error {
  using Error::Error;
};

// The requested configuration is outside what the implementation
// supports (resolution ratio != 4, more than 8 bands, ...).
struct UnsupportedConfig : Error {
  using Error::Error;
};

// After masking/validity constraints there is not enough data left to
// compute the requested quantity.
struct InsufficientSupport : Error {
  using Error::Error;
};

}  // namespace pansharp
