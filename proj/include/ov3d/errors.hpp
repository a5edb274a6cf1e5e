#pragma once

#include <stdexcept>

namespace ov3d {

/// Missing or inconsistent configuration (e.g. a scene without a camera).
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A box selected no scene points.
class EmptyObjectError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ov3d
