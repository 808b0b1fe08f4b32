#pragma once

#include <stdexcept>
#include <string>

namespace sir {

// Base class for all library errors.
class Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer dimension mismatches and invalid layer geometry.
class ShapeError : public Error {
  using Error::Error;
};

// Operation called in the wrong order (e.g. backward before forward).
class StateError : public Error {
  using Error::Error;
};

// Missing files, malformed formats, inconsistent annotations.
class DataError : public Error {
  using Error::Error;
};

// NaN gradients, divergent training, singular fits.
class NumericError : public Error {
  using Error::Error;
};

}  // namespace sir
