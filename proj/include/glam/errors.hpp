#pragma once

#include <stdexcept>
#include <string>

namespace glam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A knob is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A dataset, graph or checkpoint file could not be parsed. The message names
/// the file and, where applicable, the offending line.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// An operation was called out of order (e.g. backward without forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// The training loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace glam
