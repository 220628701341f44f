#pragma once

#include <stdexcept>
#include <string>

namespace uwsplat {

// Raised for unreadable, malformed or inconsistent input data (files, datasets).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an optimization produces non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uwsplat
