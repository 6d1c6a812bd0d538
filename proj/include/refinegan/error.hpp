#pragma once

#include <stdexcept>
#include <string>

namespace refinegan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument values, non-finite samples, out-of-range rates.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// A file parsed but its contents violate the format.
class MalformedFile : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// A training loss became NaN or infinite.
class Divergence : public Error {
 public:
  using Error::Error;
};

}  // namespace refinegan
