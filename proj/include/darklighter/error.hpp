#pragma once

#include <stdexcept>
#include <string>

namespace darklighter {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or map dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Inverting the iteration would divide by a map value too close to zero.
class IllConditioned : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File contents are not in the expected encoding.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A weight file is well-formed but lacks a tensor or has the wrong shape.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became NaN or infinite.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace darklighter
