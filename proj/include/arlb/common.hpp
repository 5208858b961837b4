#pragma once

#include <stdexcept>
#include <string>

namespace arlb {

// Base class for all recoverable errors raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Tensor/layer shape mismatches; the message names the offending layer.
class ShapeError : public Error {
  public:
    using Error::Error;
};

// Invalid configurations, unknown names, bad CLI arguments.
class ConfigError : public Error {
  public:
    using Error::Error;
};

// File format and serialization problems.
class IoError : public Error {
  public:
    using Error::Error;
};

}  // namespace arlb
