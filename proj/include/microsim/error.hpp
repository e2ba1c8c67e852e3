#pragma once

#include <stdexcept>
#include <string>

namespace microsim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Two operands that must share a shape (or frequency grid) do not.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Input is valid but carries too little information (e.g. a constant depth
/// map handed to k-means, an empty foreground).
class DegenerateInput : public Error {
public:
  using Error::Error;
};

class AlignmentFailure : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace microsim
