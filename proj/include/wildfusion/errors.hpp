#pragma once

#include <stdexcept>
#include <string>

namespace wildfusion {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Incompatible tensor shapes or malformed dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed external data: manifests, configs, images, checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

// Bad command-line usage or config keys.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace wildfusion
