#pragma once

#include <stdexcept>
#include <string>

namespace gevrey {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: inconsistent configuration, violated precondition, malformed file.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure failed to converge or produced non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gevrey
